//! Settings merged from flags, environment, a TOML file and built-in
//! defaults, in that order of precedence. Flags and environment variables
//! are resolved by the argument parser; this module fills in the rest.
//!
//! ```toml
//! templates = "prompts/v1"
//! store = "/var/lib/rigmotion"
//! port = 7878
//!
//! [llm]
//! endpoint_url = "https://api.example.com/v1/chat/completions"
//! model_id = "gpt-4"
//! temperature = 0.7
//! max_retries = 2
//! timeout_secs = 60
//!
//! [quantize]
//! mode = "significant_figures"
//! digits = 1
//! ```
//!
//! The API key is read from `RIGMOTION_API_KEY` only.

use std::path::{Path, PathBuf};
use std::time::Duration;

use rigmotion_core::animstring::QuantizeMode;
use rigmotion_core::llm_bridge::{ApiKey, LlmConfig};
use rigmotion_core::QuantizeSpec;
use serde::Deserialize;

use crate::args::{LlmArgs, Precision};
use crate::CliError;

pub const DEFAULT_STORE: &str = "rigmotion-store";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub templates: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub port: Option<u16>,
    #[serde(default)]
    pub llm: FileLlm,
    pub quantize: Option<FileQuantize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileLlm {
    pub endpoint_url: Option<String>,
    pub model_id: Option<String>,
    pub temperature: Option<f64>,
    pub max_retries: Option<u32>,
    pub timeout_secs: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileQuantize {
    pub mode: QuantizeMode,
    pub digits: u32,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn llm_config(&self, args: &LlmArgs) -> Result<LlmConfig, CliError> {
        let defaults = LlmConfig::default();
        let file = &self.llm;
        let timeout = args.timeout.or(file.timeout_secs).map_or(defaults.timeout, |s| {
            if s.is_finite() && s > 0.0 {
                Duration::from_secs_f64(s)
            } else {
                Duration::ZERO
            }
        });
        let cfg = LlmConfig {
            endpoint_url: args.endpoint.clone().or_else(|| file.endpoint_url.clone()).unwrap_or(defaults.endpoint_url),
            model_id: args.model.clone().or_else(|| file.model_id.clone()).unwrap_or(defaults.model_id),
            api_key: ApiKey::from_env(),
            temperature: args.temperature.or(file.temperature).unwrap_or(defaults.temperature),
            max_retries: args.max_retries.or(file.max_retries).unwrap_or(defaults.max_retries),
            timeout,
        };
        cfg.validate().map_err(CliError::Usage)?;
        Ok(cfg)
    }

    /// Precision from flags, else the file, else `fallback`.
    pub fn quantize(&self, p: &Precision, fallback: QuantizeSpec) -> QuantizeSpec {
        let spec = match (p.sig_figs, p.decimals, self.quantize) {
            (Some(n), _, _) => QuantizeSpec::significant_figures(n),
            (None, Some(n), _) => QuantizeSpec::decimal_places(n),
            (None, None, Some(FileQuantize { mode: QuantizeMode::SignificantFigures, digits })) => {
                QuantizeSpec::significant_figures(digits)
            }
            (None, None, Some(FileQuantize { mode: QuantizeMode::DecimalPlaces, digits })) => {
                QuantizeSpec::decimal_places(digits)
            }
            (None, None, None) => fallback,
        };
        if p.truncate {
            spec.truncating()
        } else {
            spec
        }
    }
}
