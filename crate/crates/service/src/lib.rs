//! HTTP service over the rigmotion core: skeleton and clip storage,
//! generation sessions, server-side frame sampling and controller
//! simulation.
//!
//! | route | purpose |
//! |---|---|
//! | `POST /skeletons` | store object JSON, returns `skeleton_id` |
//! | `GET /skeletons/{id}` | canonical object JSON |
//! | `POST /sessions` | open a session on a skeleton |
//! | `GET /sessions/{id}` | session with its history |
//! | `POST /sessions/{id}/generate` | generate a clip, 502 when the model never produces a valid one |
//! | `GET /clips/{id}` | canonical clip JSON |
//! | `GET /clips/{id}/frames` | world poses on the fps grid |
//! | `POST /controllers` | store a controller program (DSL text) |
//! | `GET /controllers/{id}` | program JSON |
//! | `POST /controllers/generate` | generate a controller from a request |
//! | `POST /controllers/{id}/simulate` | simulation trace |

mod error;
mod handlers;
pub mod store;

use std::future::Future;
use std::sync::Arc;

use axum::routing::{get, post};
use axum::Router;
use dashmap::DashMap;
use rigmotion_core::llm_bridge::{LlmConfig, Transport};
use rigmotion_core::promptkit::TemplateSet;
use tokio::net::TcpListener;
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;

pub use error::ApiError;
pub use store::{Kind, Store, StoreError};

pub struct AppState {
    pub store: Store,
    pub transport: Arc<dyn Transport>,
    pub llm: LlmConfig,
    pub templates: TemplateSet,
    session_locks: DashMap<String, Arc<Mutex<()>>>,
}

impl AppState {
    pub fn new(store: Store, transport: Arc<dyn Transport>, llm: LlmConfig, templates: TemplateSet) -> Self {
        Self { store, transport, llm, templates, session_locks: DashMap::new() }
    }

    fn session_lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.session_locks.entry(id.to_string()).or_default().clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/skeletons", post(handlers::post_skeleton))
        .route("/skeletons/{id}", get(handlers::get_skeleton))
        .route("/sessions", post(handlers::post_session))
        .route("/sessions/{id}", get(handlers::get_session))
        .route("/sessions/{id}/generate", post(handlers::generate))
        .route("/clips/{id}", get(handlers::get_clip))
        .route("/clips/{id}/frames", get(handlers::get_frames))
        .route("/controllers", post(handlers::post_controller))
        .route("/controllers/generate", post(handlers::generate_controller))
        .route("/controllers/{id}", get(handlers::get_controller))
        .route("/controllers/{id}/simulate", post(handlers::simulate))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    tracing::info!(addr = ?listener.local_addr()?, store = %state.store.root().display(), "serving");
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
