//! JSON bodies exchanged with the rigmotion service.

use rigmotion_core::control::KeyInput;
use rigmotion_core::promptkit::{Demonstration, PromptMode};
use rigmotion_core::EdgeMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_PORT: u16 = 7878;
pub const DEFAULT_FPS: f64 = 30.0;

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub details: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonCreated {
    pub skeleton_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub skeleton_id: String,
    /// Caller-chosen id; a random one is assigned when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub user_request: String,
    pub clip_id: String,
    pub attempts: u32,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub skeleton_id: String,
    pub history: Vec<HistoryEntry>,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub request: String,
    pub mode: PromptMode,
    /// When absent, the session's latest clip serves as the demonstration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demonstrations: Option<Vec<Demonstration>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub clip_id: String,
    pub attempts: u32,
    pub repair_notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesQuery {
    pub skeleton: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<EdgeMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerCreated {
    pub controller_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateControllerRequest {
    pub request: String,
    pub available_clips: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateControllerResponse {
    pub controller_id: String,
    pub attempts: u32,
    pub repair_notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRequest {
    #[serde(default)]
    pub inputs: Vec<KeyInput>,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
}
