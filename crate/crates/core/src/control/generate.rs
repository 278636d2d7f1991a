use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_controller, ControllerProgram};
use crate::llm_bridge::{repair_loop, LlmConfig, LoopFailure, Transport, TransportError};
use crate::promptkit::{substitute, TemplateSet};

#[derive(Debug, Error)]
pub enum ControlGenError {
    #[error("at least one clip must be available")]
    EmptyClipList,
    #[error(transparent)]
    Transport(TransportError),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("no valid controller after {attempts} attempt(s): {}", last_errors.join("; "))]
    NoValidController { attempts: u32, last_errors: Vec<String>, repair_notes: Vec<String> },
}

impl ControlGenError {
    pub fn code(&self) -> &'static str {
        match self {
            ControlGenError::EmptyClipList => "EmptyClipList",
            ControlGenError::Transport(_) => "TransportError",
            ControlGenError::Auth(_) => "AuthError",
            ControlGenError::NoValidController { .. } => "NoValidController",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerResult {
    pub program: ControllerProgram,
    pub raw_response: String,
    pub attempts: u32,
    pub repair_notes: Vec<String>,
}

/// Asks the model for a controller program that uses only
/// `available_clips`, repairing invalid replies like the animation loop.
pub fn generate_controller(
    request: &str,
    available_clips: &[String],
    cfg: &LlmConfig,
    transport: &dyn Transport,
    templates: &TemplateSet,
) -> Result<ControllerResult, ControlGenError> {
    if available_clips.is_empty() {
        return Err(ControlGenError::EmptyClipList);
    }
    let clip_list: Vec<String> = available_clips.iter().map(|c| format!("- \"{c}\"")).collect();
    let prompt = substitute(
        &templates.control,
        &[("AVAILABLE_CLIPS", &clip_list.join("\n")), ("USER_REQUEST", request)],
    );
    let check = |raw: &str| check_controller(raw, available_clips);
    match repair_loop(transport, cfg, prompt, &templates.control_repair, check) {
        Ok(ok) => Ok(ControllerResult {
            program: ok.value,
            raw_response: ok.raw_response,
            attempts: ok.attempts,
            repair_notes: ok.repair_notes,
        }),
        Err(LoopFailure::Transport(TransportError::Auth(m))) => Err(ControlGenError::Auth(m)),
        Err(LoopFailure::Transport(e)) => Err(ControlGenError::Transport(e)),
        Err(LoopFailure::Exhausted { attempts, last_errors, repair_notes }) => {
            Err(ControlGenError::NoValidController { attempts, last_errors, repair_notes })
        }
    }
}

fn check_controller(raw: &str, available: &[String]) -> Result<ControllerProgram, Vec<String>> {
    let program = parse_controller(raw).map_err(|e| vec![e.to_string()])?;
    let missing: Vec<String> = program
        .clips()
        .into_iter()
        .filter(|c| !available.iter().any(|a| a == c))
        .map(|c| format!("clip {c:?} is not available; use one of: {}", available.join(", ")))
        .collect();
    if missing.is_empty() {
        Ok(program)
    } else {
        Err(missing)
    }
}
