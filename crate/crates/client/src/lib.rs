//! Async client for the rigmotion service.
//!
//! ```no_run
//! # async fn demo() -> Result<(), rigmotion_client::ClientError> {
//! let client = rigmotion_client::Client::new("http://127.0.0.1:7878");
//! let created = client.post_skeleton(r#"{"name":"root"}"#).await?;
//! let session = client.create_session(&created.skeleton_id, None).await?;
//! # Ok(()) }
//! ```

use reqwest::{RequestBuilder, StatusCode};
use rigmotion_api::*;
use rigmotion_core::clip::parse_clip_json;
use rigmotion_core::control::{ControllerProgram, SimTrace};
use rigmotion_core::kinematics::Frame;
use rigmotion_core::{parse_object_json, Clip, Skeleton};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub use rigmotion_api as api;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server answered {status}: {} ({})", body.message, body.code)]
    Api { status: StatusCode, body: ErrorBody },
    #[error("unexpected response: {0}")]
    Decode(String),
}

impl ClientError {
    /// The server's error code, when the server answered with one.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.code),
            _ => None,
        }
    }

    pub fn status(&self) -> Option<StatusCode> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            ClientError::Http(e) => e.status(),
            ClientError::Decode(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self::with_http(base_url, reqwest::Client::new())
    }

    pub fn with_http(base_url: impl Into<String>, http: reqwest::Client) -> Self {
        Self { base: base_url.into().trim_end_matches('/').to_string(), http }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    async fn send_text(&self, req: RequestBuilder) -> Result<String, ClientError> {
        let resp = req.send().await?;
        let status = resp.status();
        let text = resp.text().await?;
        if status.is_success() {
            return Ok(text);
        }
        let body = serde_json::from_str(&text).unwrap_or(ErrorBody {
            code: "Unknown".into(),
            message: text,
            details: serde_json::Value::Null,
        });
        Err(ClientError::Api { status, body })
    }

    async fn send<T: DeserializeOwned>(&self, req: RequestBuilder) -> Result<T, ClientError> {
        let text = self.send_text(req).await?;
        serde_json::from_str(&text).map_err(|e| ClientError::Decode(e.to_string()))
    }

    fn post_json<B: Serialize>(&self, path: &str, body: &B) -> RequestBuilder {
        self.http.post(self.url(path)).json(body)
    }

    fn post_text(&self, path: &str, body: &str) -> RequestBuilder {
        self.http.post(self.url(path)).header(reqwest::header::CONTENT_TYPE, "text/plain").body(body.to_string())
    }

    pub async fn post_skeleton(&self, object_json: &str) -> Result<SkeletonCreated, ClientError> {
        self.send(self.post_text("/skeletons", object_json)).await
    }

    /// Canonical object JSON exactly as stored.
    pub async fn get_skeleton_raw(&self, id: &str) -> Result<String, ClientError> {
        self.send_text(self.http.get(self.url(&format!("/skeletons/{id}")))).await
    }

    pub async fn get_skeleton(&self, id: &str) -> Result<Skeleton, ClientError> {
        let text = self.get_skeleton_raw(id).await?;
        parse_object_json(&text).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn create_session(&self, skeleton_id: &str, session_id: Option<&str>) -> Result<SessionCreated, ClientError> {
        let body = CreateSession { skeleton_id: skeleton_id.into(), session_id: session_id.map(str::to_string) };
        self.send(self.post_json("/sessions", &body)).await
    }

    pub async fn get_session(&self, id: &str) -> Result<Session, ClientError> {
        self.send(self.http.get(self.url(&format!("/sessions/{id}")))).await
    }

    pub async fn generate(&self, session_id: &str, req: &GenerateRequest) -> Result<GenerateResponse, ClientError> {
        self.send(self.post_json(&format!("/sessions/{session_id}/generate"), req)).await
    }

    /// Canonical clip JSON exactly as stored.
    pub async fn get_clip_raw(&self, id: &str) -> Result<String, ClientError> {
        self.send_text(self.http.get(self.url(&format!("/clips/{id}")))).await
    }

    pub async fn get_clip(&self, id: &str) -> Result<Clip, ClientError> {
        let text = self.get_clip_raw(id).await?;
        parse_clip_json(&text).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn frames(&self, clip_id: &str, q: &FramesQuery) -> Result<Vec<Frame>, ClientError> {
        let mut path = format!("/clips/{clip_id}/frames?skeleton={}", q.skeleton);
        if let Some(fps) = q.fps {
            path.push_str(&format!("&fps={fps}"));
        }
        if let Some(edge) = q.edge {
            path.push_str(&format!("&edge={edge}"));
        }
        self.send(self.http.get(self.url(&path))).await
    }

    pub async fn post_controller(&self, dsl: &str) -> Result<ControllerCreated, ClientError> {
        self.send(self.post_text("/controllers", dsl)).await
    }

    pub async fn get_controller(&self, id: &str) -> Result<ControllerProgram, ClientError> {
        self.send(self.http.get(self.url(&format!("/controllers/{id}")))).await
    }

    pub async fn generate_controller(
        &self,
        req: &GenerateControllerRequest,
    ) -> Result<GenerateControllerResponse, ClientError> {
        self.send(self.post_json("/controllers/generate", req)).await
    }

    /// Trace JSON exactly as the server rendered it.
    pub async fn simulate_raw(&self, controller_id: &str, req: &SimulateRequest) -> Result<String, ClientError> {
        self.send_text(self.post_json(&format!("/controllers/{controller_id}/simulate"), req)).await
    }

    pub async fn simulate(&self, controller_id: &str, req: &SimulateRequest) -> Result<SimTrace, ClientError> {
        let text = self.simulate_raw(controller_id, req).await?;
        serde_json::from_str(&text).map_err(|e| ClientError::Decode(e.to_string()))
    }
}
