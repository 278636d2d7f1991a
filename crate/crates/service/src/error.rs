use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use rigmotion_api::ErrorBody;
use serde_json::{json, Value};

use crate::store::StoreError;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, body: ErrorBody { code: code.to_string(), message: message.into(), details: Value::Null } }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.body.details = details;
        self
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("{what} {id:?} not found"))
            .with_details(json!({ "kind": what, "id": id }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::InvalidId(id) => ApiError::bad_request("InvalidId", format!("invalid id {id:?}")),
            StoreError::AlreadyExists(id) => {
                ApiError::new(StatusCode::CONFLICT, "AlreadyExists", format!("{id:?} already exists"))
            }
            StoreError::Io(e) => ApiError::internal(format!("store: {e}")),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::warn!(code = %self.body.code, "{}", self.body.message);
        }
        (self.status, Json(self.body)).into_response()
    }
}
