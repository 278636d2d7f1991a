//! Chat-completion transport and the generate/validate/repair loop.
//!
//! The [`Transport`] is injected. [`HttpTransport`] speaks the common
//! chat-completions JSON shape; [`ReplayTransport`] serves canned responses
//! from memory or a directory and never touches the network.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::animstring::{parse_animstring, to_clip};
use crate::clip::{validate_against, Clip};
use crate::promptkit::{build_metaprompt, substitute, MetapromptSpec, PromptError, TemplateSet};
use crate::skeleton::Skeleton;

pub const API_KEY_ENV: &str = "RIGMOTION_API_KEY";
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_TIMEOUT_SECS: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

/// Request body sent to a chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("endpoint rejected the credentials: {0}")]
    Auth(String),
    #[error("could not decode the endpoint response: {0}")]
    Decode(String),
    #[error("replay transport has no response left after {served}")]
    Exhausted { served: usize },
    #[error("{0}")]
    Config(String),
}

/// Sends one chat request and returns the assistant text. Implementations
/// are shared across concurrent generations.
pub trait Transport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// API key that keeps itself out of debug output.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()).map(Self)
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub api_key: Option<ApiKey>,
    /// Sampling temperature in `[0, 2]`. The default is not tuned.
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout: Duration,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            model_id: "gpt-4".into(),
            api_key: None,
            temperature: DEFAULT_TEMPERATURE,
            max_retries: DEFAULT_MAX_RETRIES,
            timeout: Duration::from_secs_f64(DEFAULT_TIMEOUT_SECS),
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} is outside [0, 2]", self.temperature));
        }
        if self.timeout.is_zero() {
            return Err("timeout must be positive".into());
        }
        Ok(())
    }

    fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest { model: self.model_id.clone(), messages, temperature: self.temperature }
    }
}

/// Blocking HTTP transport for chat-completions endpoints. Must not be
/// called from inside an async task; use `spawn_blocking` there.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    endpoint_url: String,
    api_key: Option<ApiKey>,
    timeout: Duration,
}

impl HttpTransport {
    pub fn new(cfg: &LlmConfig) -> Self {
        Self { endpoint_url: cfg.endpoint_url.clone(), api_key: cfg.api_key.clone(), timeout: cfg.timeout }
    }
}

impl Transport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        if self.endpoint_url.is_empty() {
            return Err(TransportError::Config("no LLM endpoint configured".into()));
        }
        // Built per call: a blocking client may not be created or dropped on
        // an async runtime thread.
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let mut req = client.post(&self.endpoint_url).json(request);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key.expose());
        }
        let resp = req.send().map_err(|e| TransportError::Network(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().map_err(|e| TransportError::Network(e.to_string()))?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(TransportError::Auth(body));
        }
        if !status.is_success() {
            return Err(TransportError::Http { status: status.as_u16(), body });
        }
        extract_message_content(&body)
    }
}

/// Pulls `choices[0].message.content` out of a chat-completions response.
pub fn extract_message_content(body: &str) -> Result<String, TransportError> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|e| TransportError::Decode(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(serde_json::Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| TransportError::Decode("missing choices[0].message.content".into()))
}

/// Serves a fixed list of responses in order and records every request.
#[derive(Debug, Default)]
pub struct ReplayTransport {
    responses: Vec<String>,
    state: Mutex<ReplayState>,
}

#[derive(Debug, Default)]
struct ReplayState {
    served: usize,
    requests: Vec<ChatRequest>,
}

impl ReplayTransport {
    pub fn from_responses<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self { responses: responses.into_iter().map(Into::into).collect(), state: Mutex::default() }
    }

    /// Loads every regular file in `dir` whose stem is a number, in numeric
    /// order (`1.txt`, `2.txt`, `10.txt`, ...).
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut numbered: Vec<(u64, PathBuf)> = Vec::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if !path.is_file() {
                continue;
            }
            if let Some(n) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<u64>().ok()) {
                numbered.push((n, path));
            }
        }
        numbered.sort();
        let responses = numbered.iter().map(|(_, p)| fs::read_to_string(p)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_responses(responses))
    }

    pub fn requests(&self) -> Vec<ChatRequest> {
        self.state.lock().expect("replay lock").requests.clone()
    }

    pub fn served(&self) -> usize {
        self.state.lock().expect("replay lock").served
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut state = self.state.lock().expect("replay lock");
        state.requests.push(request.clone());
        let served = state.served;
        let resp = self.responses.get(served).cloned().ok_or(TransportError::Exhausted { served })?;
        state.served += 1;
        Ok(resp)
    }
}

/// Refuses every request. Useful wherever a code path must prove it stays
/// offline.
#[derive(Debug, Default)]
pub struct OfflineTransport {
    attempts: Mutex<usize>,
}

impl OfflineTransport {
    pub fn attempts(&self) -> usize {
        *self.attempts.lock().expect("offline lock")
    }
}

impl Transport for OfflineTransport {
    fn complete(&self, _request: &ChatRequest) -> Result<String, TransportError> {
        *self.attempts.lock().expect("offline lock") += 1;
        Err(TransportError::Network("network access is disabled".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub clip: Clip,
    pub raw_response: String,
    pub attempts: u32,
    pub repair_notes: Vec<String>,
}

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Transport(TransportError),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("no valid animation after {attempts} attempt(s): {}", last_errors.join("; "))]
    NoValidAnimation { attempts: u32, last_errors: Vec<String>, repair_notes: Vec<String> },
}

impl BridgeError {
    pub fn code(&self) -> &'static str {
        match self {
            BridgeError::Prompt(e) => e.code(),
            BridgeError::Transport(_) => "TransportError",
            BridgeError::Auth(_) => "AuthError",
            BridgeError::NoValidAnimation { .. } => "NoValidAnimation",
        }
    }
}

/// Outcome of [`repair_loop`].
#[derive(Debug, Clone)]
pub struct LoopSuccess<T> {
    pub value: T,
    pub raw_response: String,
    pub attempts: u32,
    pub repair_notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum LoopFailure {
    Transport(TransportError),
    /// `repair_notes` covers the attempts before the last one.
    Exhausted { attempts: u32, last_errors: Vec<String>, repair_notes: Vec<String> },
}

/// Sends `prompt`, checks the reply with `check`, and on failure sends a
/// repair turn built from `repair_template` (`{ERRORS}` receives the error
/// list) until `check` passes or `cfg.max_retries` repairs have been spent.
pub fn repair_loop<T>(
    transport: &dyn Transport,
    cfg: &LlmConfig,
    prompt: String,
    repair_template: &str,
    check: impl Fn(&str) -> Result<T, Vec<String>>,
) -> Result<LoopSuccess<T>, LoopFailure> {
    let mut messages = vec![ChatMessage::user(prompt)];
    let mut repair_notes = Vec::new();
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        let raw = transport.complete(&cfg.request(messages.clone())).map_err(LoopFailure::Transport)?;
        match check(&raw) {
            Ok(value) => return Ok(LoopSuccess { value, raw_response: raw, attempts, repair_notes }),
            Err(errors) => {
                if attempts > cfg.max_retries {
                    return Err(LoopFailure::Exhausted { attempts, last_errors: errors, repair_notes });
                }
                repair_notes.push(format!("attempt {attempts}: {}", errors.join("; ")));
                let listed: Vec<String> = errors.iter().map(|e| format!("- {e}")).collect();
                messages.push(ChatMessage::assistant(raw));
                messages.push(ChatMessage::user(substitute(repair_template, &[("ERRORS", &listed.join("\n"))])));
            }
        }
    }
}

/// Builds the metaprompt for `spec`, asks the model, and returns the first
/// clip that parses and validates against `skeleton` with no errors.
pub fn generate_animation(
    spec: &MetapromptSpec,
    skeleton: &Skeleton,
    cfg: &LlmConfig,
    transport: &dyn Transport,
    templates: &TemplateSet,
) -> Result<GenerationResult, BridgeError> {
    let prompt = build_metaprompt(spec, templates)?;
    let check = |raw: &str| candidate_clip(raw, skeleton);
    match repair_loop(transport, cfg, prompt, &templates.repair, check) {
        Ok(ok) => Ok(GenerationResult {
            clip: ok.value,
            raw_response: ok.raw_response,
            attempts: ok.attempts,
            repair_notes: ok.repair_notes,
        }),
        Err(LoopFailure::Transport(TransportError::Auth(m))) => Err(BridgeError::Auth(m)),
        Err(LoopFailure::Transport(e)) => Err(BridgeError::Transport(e)),
        Err(LoopFailure::Exhausted { attempts, last_errors, repair_notes }) => {
            Err(BridgeError::NoValidAnimation { attempts, last_errors, repair_notes })
        }
    }
}

/// Extracts, parses, converts and validates one model reply.
pub fn candidate_clip(raw: &str, skeleton: &Skeleton) -> Result<Clip, Vec<String>> {
    let text = extract_candidate(raw);
    let doc = parse_animstring(&text).map_err(|e| vec![e.to_string()])?;
    let clip = to_clip(&doc).map_err(|e| vec![e.to_string()])?;
    let report = validate_against(&clip, skeleton);
    if report.is_valid() {
        Ok(clip)
    } else {
        Err(report.error_messages())
    }
}

/// The animation block of a model reply: fences removed, from the first line
/// starting with `ANIMATION` through the next `END` line. Falls back to the
/// whole trimmed text.
pub fn extract_candidate(response_text: &str) -> String {
    let lines: Vec<&str> = response_text.lines().filter(|l| !l.trim_start().starts_with("```")).collect();
    let starts_with_kw = |l: &str, kw: &str| {
        l.split_whitespace().next().is_some_and(|w| w.eq_ignore_ascii_case(kw))
    };
    let Some(start) = lines.iter().position(|l| starts_with_kw(l, "ANIMATION")) else {
        return response_text.trim().to_string();
    };
    let end = lines[start..]
        .iter()
        .position(|l| l.trim().eq_ignore_ascii_case("END"))
        .map_or(lines.len(), |i| start + i + 1);
    lines[start..end].join("\n")
}
