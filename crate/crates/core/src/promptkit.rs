//! Metaprompt assembly for animation generation.
//!
//! Templates are plain-text assets. Placeholders are `{OBJECT_NAME}`,
//! `{OBJECT_JSON}`, `{ANIMATION_NAME}`, `{ANIMATION_STRING}` and
//! `{USER_REQUEST}`. The text between the `{BEGIN_DEMONSTRATION}` and
//! `{END_DEMONSTRATION}` marker lines is repeated once per demonstration.
//! Substitution is a single left-to-right pass, so text inserted for one
//! placeholder is never scanned for further placeholders.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::animstring::{estimate_tokens, parse_animstring, serialize_animstring, AnimStringError, QuantizeSpec};
use crate::clip::Clip;
use crate::skeleton::{parse_object_json, serialize_object_json, Skeleton, SkeletonError};

pub const BEGIN_DEMONSTRATION: &str = "{BEGIN_DEMONSTRATION}";
pub const END_DEMONSTRATION: &str = "{END_DEMONSTRATION}";

/// Placeholder names recognised in animation templates.
pub const PLACEHOLDERS: [&str; 5] = ["OBJECT_NAME", "OBJECT_JSON", "ANIMATION_NAME", "ANIMATION_STRING", "USER_REQUEST"];

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("demonstration {index} ({name:?}) does not parse: {source}")]
    UnparsableDemonstration {
        index: usize,
        name: String,
        #[source]
        source: AnimStringError,
    },
    #[error("object JSON does not parse: {0}")]
    UnparsableObjectJson(#[from] SkeletonError),
    #[error("{0} generation needs a demonstration")]
    MissingDemonstration(PromptMode),
    #[error("zero-shot generation takes exactly one format demonstration, got {0}")]
    TooManyDemonstrations(usize),
    #[error("template {name}: {message}")]
    Template { name: String, message: String },
    #[error("reading template {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PromptError {
    pub fn code(&self) -> &'static str {
        match self {
            PromptError::UnparsableDemonstration { .. } => "UnparsableDemonstration",
            PromptError::UnparsableObjectJson(_) => "UnparsableObjectJson",
            PromptError::MissingDemonstration(_) => "MissingDemonstration",
            PromptError::TooManyDemonstrations(_) => "TooManyDemonstrations",
            PromptError::Template { .. } => "TemplateError",
            PromptError::Io { .. } => "TemplateIo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    FewShot,
    ZeroShot,
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptMode::FewShot => "few_shot",
            PromptMode::ZeroShot => "zero_shot",
        })
    }
}

impl std::str::FromStr for PromptMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "few_shot" => Ok(PromptMode::FewShot),
            "zero_shot" => Ok(PromptMode::ZeroShot),
            other => Err(format!("unknown mode {other:?} (expected few_shot or zero_shot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    /// Natural-language description of the motion.
    pub animation_name: String,
    /// Grammar v1 text.
    pub animation_string: String,
}

impl Demonstration {
    pub fn new(name: impl Into<String>, animation_string: impl Into<String>) -> Self {
        Self { animation_name: name.into(), animation_string: animation_string.into() }
    }

    pub fn from_clip(name: impl Into<String>, clip: &Clip, q: &QuantizeSpec) -> Self {
        Self::new(name, serialize_animstring(clip, q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetapromptSpec {
    pub template_id: PromptMode,
    pub object_name: String,
    pub object_json: String,
    pub demonstrations: Vec<Demonstration>,
    pub user_request: String,
}

impl MetapromptSpec {
    /// Spec targeting `skeleton`, with its canonical object JSON.
    pub fn for_skeleton(
        mode: PromptMode,
        skeleton: &Skeleton,
        demonstrations: Vec<Demonstration>,
        user_request: impl Into<String>,
    ) -> Self {
        Self {
            template_id: mode,
            object_name: skeleton.object_name().to_string(),
            object_json: serialize_object_json(skeleton),
            demonstrations,
            user_request: user_request.into(),
        }
    }

    /// Checks the object JSON, the demonstration count for the mode, and
    /// that every demonstration parses.
    pub fn check(&self) -> Result<Skeleton, PromptError> {
        let skeleton = parse_object_json(&self.object_json)?;
        match (self.template_id, self.demonstrations.len()) {
            (mode, 0) => return Err(PromptError::MissingDemonstration(mode)),
            (PromptMode::ZeroShot, n) if n > 1 => return Err(PromptError::TooManyDemonstrations(n)),
            _ => {}
        }
        for (index, d) in self.demonstrations.iter().enumerate() {
            parse_animstring(&d.animation_string).map_err(|source| PromptError::UnparsableDemonstration {
                index,
                name: d.animation_name.clone(),
                source,
            })?;
        }
        Ok(skeleton)
    }
}

/// A template split around its demonstration block.
#[derive(Debug, Clone, PartialEq)]
pub struct AnimationTemplate {
    head: String,
    demonstration: String,
    tail: String,
}

impl AnimationTemplate {
    pub fn parse(name: &str, text: &str) -> Result<Self, PromptError> {
        let err = |message: &str| PromptError::Template { name: name.to_string(), message: message.to_string() };
        let (head, rest) = text.split_once(BEGIN_DEMONSTRATION).ok_or_else(|| err("missing {BEGIN_DEMONSTRATION}"))?;
        let (block, tail) = rest.split_once(END_DEMONSTRATION).ok_or_else(|| err("missing {END_DEMONSTRATION}"))?;
        let strip_nl = |s: &str| s.strip_prefix('\n').unwrap_or(s).to_string();
        Ok(Self { head: head.to_string(), demonstration: strip_nl(block), tail: strip_nl(tail) })
    }
}

/// Template assets used by the prompt builders and the repair loops.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    pub few_shot: AnimationTemplate,
    pub zero_shot: AnimationTemplate,
    /// Repair turn for animations; `{ERRORS}` receives the error list.
    pub repair: String,
    /// Controller prompt; `{AVAILABLE_CLIPS}` and `{USER_REQUEST}`.
    pub control: String,
    pub control_repair: String,
}

const TEMPLATE_FILES: [&str; 5] = ["few_shot.txt", "zero_shot.txt", "repair.txt", "control.txt", "control_repair.txt"];

impl TemplateSet {
    /// The v1 templates shipped in `templates/v1`.
    pub fn builtin() -> Self {
        Self::from_texts([
            include_str!("../templates/v1/few_shot.txt"),
            include_str!("../templates/v1/zero_shot.txt"),
            include_str!("../templates/v1/repair.txt"),
            include_str!("../templates/v1/control.txt"),
            include_str!("../templates/v1/control_repair.txt"),
        ])
        .expect("built-in templates are well formed")
    }

    /// Loads templates from `dir`. Files that are absent fall back to the
    /// built-in version.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let builtin = Self::builtin();
        let mut texts: [Option<String>; 5] = Default::default();
        for (slot, file) in texts.iter_mut().zip(TEMPLATE_FILES) {
            let path = dir.join(file);
            match fs::read_to_string(&path) {
                Ok(t) => *slot = Some(t),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(source) => return Err(PromptError::Io { path, source }),
            }
        }
        let [few, zero, repair, control, control_repair] = texts;
        Ok(Self {
            few_shot: match few {
                Some(t) => AnimationTemplate::parse("few_shot.txt", &t)?,
                None => builtin.few_shot,
            },
            zero_shot: match zero {
                Some(t) => AnimationTemplate::parse("zero_shot.txt", &t)?,
                None => builtin.zero_shot,
            },
            repair: repair.unwrap_or(builtin.repair),
            control: control.unwrap_or(builtin.control),
            control_repair: control_repair.unwrap_or(builtin.control_repair),
        })
    }

    fn from_texts(texts: [&str; 5]) -> Result<Self, PromptError> {
        Ok(Self {
            few_shot: AnimationTemplate::parse("few_shot.txt", texts[0])?,
            zero_shot: AnimationTemplate::parse("zero_shot.txt", texts[1])?,
            repair: texts[2].to_string(),
            control: texts[3].to_string(),
            control_repair: texts[4].to_string(),
        })
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Replaces `{NAME}` tokens whose name is bound in `vars`; other braces are
/// left alone.
pub fn substitute(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after.find(|c: char| !(c.is_ascii_uppercase() || c == '_')).unwrap_or(after.len());
        let bound = (after[name_len..].starts_with('}'))
            .then(|| vars.iter().find(|(k, _)| *k == &after[..name_len]))
            .flatten();
        match bound {
            Some((_, value)) => {
                out.push_str(value);
                rest = &after[name_len + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Full conditioning text for `spec` using `templates`.
pub fn build_metaprompt(spec: &MetapromptSpec, templates: &TemplateSet) -> Result<String, PromptError> {
    spec.check()?;
    let template = match spec.template_id {
        PromptMode::FewShot => &templates.few_shot,
        PromptMode::ZeroShot => &templates.zero_shot,
    };
    let globals = [
        ("OBJECT_NAME", spec.object_name.as_str()),
        ("OBJECT_JSON", spec.object_json.as_str()),
        ("USER_REQUEST", spec.user_request.as_str()),
    ];

    let mut out = substitute(&template.head, &globals);
    for (i, demo) in spec.demonstrations.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let animation_string = demo.animation_string.trim_end();
        let mut vars = globals.to_vec();
        vars.push(("ANIMATION_NAME", demo.animation_name.as_str()));
        vars.push(("ANIMATION_STRING", animation_string));
        out.push_str(&substitute(&template.demonstration, &vars));
    }
    out.push_str(&substitute(&template.tail, &globals));
    Ok(out)
}

/// Steps to take, in order, when a prompt is over budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Remediation {
    RaiseCompressionTolerance,
    CoarsenQuantization,
    DropLastDemonstration,
}

impl fmt::Display for Remediation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Remediation::RaiseCompressionTolerance => "raise the keyframe compression tolerance",
            Remediation::CoarsenQuantization => "quantize numbers more coarsely",
            Remediation::DropLastDemonstration => "drop demonstrations, last first",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub estimated_tokens: usize,
    pub limit: usize,
    pub over_budget: bool,
    pub remediation: Vec<Remediation>,
}

pub fn check_budget(prompt: &str, limit_tokens: usize) -> BudgetReport {
    let estimated_tokens = estimate_tokens(prompt);
    BudgetReport {
        estimated_tokens,
        limit: limit_tokens,
        over_budget: estimated_tokens > limit_tokens,
        remediation: vec![
            Remediation::RaiseCompressionTolerance,
            Remediation::CoarsenQuantization,
            Remediation::DropLastDemonstration,
        ],
    }
}
