use std::collections::HashMap;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use rigmotion_api::*;
use rigmotion_core::clip::{parse_clip_json, serialize_clip_json};
use rigmotion_core::control::{self, parse_controller, ControlGenError, ControllerProgram, Trigger};
use rigmotion_core::llm_bridge::{generate_animation, BridgeError};
use rigmotion_core::promptkit::{Demonstration, MetapromptSpec};
use rigmotion_core::{parse_object_json, sample_series, serialize_object_json, EdgeMode, QuantizeSpec, Skeleton};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::{ApiError, AppState, Kind};

type App = State<Arc<AppState>>;

/// Upper bound on frames per request.
const MAX_FRAMES: f64 = 100_000.0;
/// Upper bound on timer and random-check events per simulation.
const MAX_SIM_STEPS: f64 = 10_000_000.0;
const MIN_SESSION_ID_LEN: usize = 16;

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn json_bytes(status: StatusCode, bytes: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

fn parse_body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request("MalformedRequest", e.to_string()))
}

fn utf8(bytes: &Bytes) -> Result<&str, ApiError> {
    std::str::from_utf8(bytes).map_err(|_| ApiError::bad_request("MalformedRequest", "body is not UTF-8"))
}

fn load(app: &AppState, kind: Kind, id: &str, what: &str) -> Result<Vec<u8>, ApiError> {
    app.store.get(kind, id)?.ok_or_else(|| ApiError::not_found(what, id))
}

fn corrupt(what: &str, id: &str, e: impl std::fmt::Display) -> ApiError {
    ApiError::internal(format!("stored {what} {id:?} is unreadable: {e}"))
}

fn load_skeleton(app: &AppState, id: &str) -> Result<Skeleton, ApiError> {
    let bytes = load(app, Kind::Skeleton, id, "skeleton")?;
    parse_object_json(&String::from_utf8_lossy(&bytes)).map_err(|e| corrupt("skeleton", id, e))
}

fn load_clip(app: &AppState, id: &str) -> Result<rigmotion_core::Clip, ApiError> {
    let bytes = load(app, Kind::Clip, id, "clip")?;
    parse_clip_json(&String::from_utf8_lossy(&bytes)).map_err(|e| corrupt("clip", id, e))
}

fn load_session(app: &AppState, id: &str) -> Result<Session, ApiError> {
    let bytes = load(app, Kind::Session, id, "session")?;
    serde_json::from_slice(&bytes).map_err(|e| corrupt("session", id, e))
}

fn load_controller(app: &AppState, id: &str) -> Result<ControllerProgram, ApiError> {
    let bytes = load(app, Kind::Controller, id, "controller")?;
    serde_json::from_slice(&bytes).map_err(|e| corrupt("controller", id, e))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

pub async fn post_skeleton(State(app): App, body: Bytes) -> Result<Response, ApiError> {
    let s = parse_object_json(utf8(&body)?).map_err(|e| ApiError::bad_request(e.code(), e.to_string()))?;
    let skeleton_id = app.store.put(Kind::Skeleton, serialize_object_json(&s).as_bytes())?;
    Ok((StatusCode::CREATED, Json(SkeletonCreated { skeleton_id })).into_response())
}

pub async fn get_skeleton(State(app): App, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(json_bytes(StatusCode::OK, load(&app, Kind::Skeleton, &id, "skeleton")?))
}

pub async fn post_session(State(app): App, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    if !app.store.contains(Kind::Skeleton, &req.skeleton_id) {
        return Err(ApiError::not_found("skeleton", &req.skeleton_id));
    }
    let id = match req.session_id {
        Some(id) if id.len() < MIN_SESSION_ID_LEN => {
            return Err(ApiError::bad_request(
                "InvalidId",
                format!("session ids need at least {MIN_SESSION_ID_LEN} characters"),
            ));
        }
        Some(id) => id,
        None => uuid::Uuid::new_v4().simple().to_string(),
    };
    let session = Session { id: id.clone(), skeleton_id: req.skeleton_id, history: Vec::new(), created_at: now() };
    let bytes = serde_json::to_vec(&session).map_err(|e| ApiError::internal(e.to_string()))?;
    app.store.create(Kind::Session, &id, &bytes)?;
    Ok((StatusCode::CREATED, Json(SessionCreated { session_id: id })).into_response())
}

pub async fn get_session(State(app): App, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(json_bytes(StatusCode::OK, load(&app, Kind::Session, &id, "session")?))
}

/// The session's most recent clip, as a demonstration for a follow-up
/// request.
fn latest_demonstration(app: &AppState, session: &Session) -> Result<Vec<Demonstration>, ApiError> {
    let Some(last) = session.history.last() else {
        return Err(ApiError::bad_request(
            "MissingDemonstration",
            "no demonstrations given and the session has no clips yet",
        ));
    };
    let clip = load_clip(app, &last.clip_id)?;
    Ok(vec![Demonstration::from_clip(&last.user_request, &clip, &QuantizeSpec::LLM_EXCHANGE)])
}

fn bridge_error(e: BridgeError) -> ApiError {
    let message = e.to_string();
    match e {
        BridgeError::Prompt(p) => ApiError::bad_request(p.code(), message),
        BridgeError::Transport(_) | BridgeError::Auth(_) => ApiError::new(StatusCode::BAD_GATEWAY, e.code(), message),
        BridgeError::NoValidAnimation { attempts, ref last_errors, ref repair_notes } => {
            ApiError::new(StatusCode::BAD_GATEWAY, e.code(), message).with_details(json!({
                "attempts": attempts,
                "last_errors": last_errors,
                "repair_notes": repair_notes,
            }))
        }
    }
}

pub async fn generate(State(app): App, Path(id): Path<String>, body: Bytes) -> Result<Json<GenerateResponse>, ApiError> {
    let req: GenerateRequest = parse_body(&body)?;
    let lock = app.session_lock(&id);
    let _guard = lock.lock().await;

    let mut session = load_session(&app, &id)?;
    let skeleton = load_skeleton(&app, &session.skeleton_id)?;
    let demonstrations = match req.demonstrations {
        Some(d) => d,
        None => latest_demonstration(&app, &session)?,
    };
    let spec = MetapromptSpec::for_skeleton(req.mode, &skeleton, demonstrations, req.request.clone());
    let worker = app.clone();
    let result = blocking(move || {
        generate_animation(&spec, &skeleton, &worker.llm, worker.transport.as_ref(), &worker.templates)
    })
    .await?
    .map_err(bridge_error)?;

    let clip_id = app.store.put(Kind::Clip, serialize_clip_json(&result.clip).as_bytes())?;
    session.history.push(HistoryEntry {
        user_request: req.request,
        clip_id: clip_id.clone(),
        attempts: result.attempts,
        created_at: now(),
    });
    let bytes = serde_json::to_vec(&session).map_err(|e| ApiError::internal(e.to_string()))?;
    app.store.replace(Kind::Session, &id, &bytes)?;
    Ok(Json(GenerateResponse { clip_id, attempts: result.attempts, repair_notes: result.repair_notes }))
}

pub async fn get_clip(State(app): App, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(json_bytes(StatusCode::OK, load(&app, Kind::Clip, &id, "clip")?))
}

pub async fn get_frames(
    State(app): App,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let skeleton_id = query
        .get("skeleton")
        .ok_or_else(|| ApiError::bad_request("MissingParameter", "query parameter `skeleton` is required"))?;
    let fps = match query.get("fps") {
        Some(v) => v.parse::<f64>().map_err(|_| ApiError::bad_request("InvalidFps", format!("bad fps {v:?}")))?,
        None => DEFAULT_FPS,
    };
    let edge = match query.get("edge") {
        Some(v) => v.parse::<EdgeMode>().map_err(|m| ApiError::bad_request("InvalidEdgeMode", m))?,
        None => EdgeMode::Clamp,
    };
    let clip = load_clip(&app, &id)?;
    let skeleton = load_skeleton(&app, skeleton_id)?;
    if clip.duration * fps > MAX_FRAMES {
        return Err(ApiError::bad_request("TooManyFrames", format!("more than {MAX_FRAMES} frames requested")));
    }
    let frames = blocking(move || sample_series(&clip, &skeleton, fps, edge)).await?.map_err(|e| {
        let details = match &e {
            rigmotion_core::kinematics::KinematicsError::InvalidClip(errors) => json!({ "errors": errors }),
            _ => serde_json::Value::Null,
        };
        ApiError::bad_request(e.code(), e.to_string()).with_details(details)
    })?;
    let bytes = serde_json::to_vec(&frames).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(json_bytes(StatusCode::OK, bytes))
}

fn store_program(app: &AppState, program: &ControllerProgram) -> Result<String, ApiError> {
    let bytes = serde_json::to_vec(program).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(app.store.put(Kind::Controller, &bytes)?)
}

pub async fn post_controller(State(app): App, body: Bytes) -> Result<Response, ApiError> {
    let program = parse_controller(utf8(&body)?).map_err(|e| ApiError::bad_request(e.code(), e.to_string()))?;
    let controller_id = store_program(&app, &program)?;
    Ok((StatusCode::CREATED, Json(ControllerCreated { controller_id })).into_response())
}

pub async fn get_controller(State(app): App, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(json_bytes(StatusCode::OK, load(&app, Kind::Controller, &id, "controller")?))
}

pub async fn generate_controller(State(app): App, body: Bytes) -> Result<Json<GenerateControllerResponse>, ApiError> {
    let req: GenerateControllerRequest = parse_body(&body)?;
    let worker = app.clone();
    let result = blocking(move || {
        control::generate_controller(
            &req.request,
            &req.available_clips,
            &worker.llm,
            worker.transport.as_ref(),
            &worker.templates,
        )
    })
    .await?
    .map_err(|e| {
        let message = e.to_string();
        match e {
            ControlGenError::EmptyClipList => ApiError::bad_request(e.code(), message),
            ControlGenError::Transport(_) | ControlGenError::Auth(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, e.code(), message)
            }
            ControlGenError::NoValidController { attempts, ref last_errors, ref repair_notes } => {
                ApiError::new(StatusCode::BAD_GATEWAY, e.code(), message).with_details(json!({
                    "attempts": attempts,
                    "last_errors": last_errors,
                    "repair_notes": repair_notes,
                }))
            }
        }
    })?;
    let controller_id = store_program(&app, &result.program)?;
    Ok(Json(GenerateControllerResponse { controller_id, attempts: result.attempts, repair_notes: result.repair_notes }))
}

pub async fn simulate(State(app): App, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: SimulateRequest = parse_body(&body)?;
    let program = load_controller(&app, &id)?;
    if !(req.horizon.is_finite() && req.horizon >= 0.0) {
        return Err(ApiError::bad_request("InvalidHorizon", "horizon must be a finite number of seconds ≥ 0"));
    }
    let shortest = program
        .transitions
        .iter()
        .filter_map(|t| match t.trigger {
            Trigger::Timer { seconds } => Some(seconds),
            Trigger::Random { interval, .. } => Some(interval),
            Trigger::Key { .. } => None,
        })
        .fold(f64::INFINITY, f64::min);
    if req.horizon / shortest > MAX_SIM_STEPS {
        return Err(ApiError::bad_request("HorizonTooLong", "horizon is too long for the program's shortest trigger"));
    }
    let trace = blocking(move || control::simulate(&program, &req.inputs, req.horizon, req.seed)).await?;
    Ok(json_bytes(StatusCode::OK, trace.to_json().into_bytes()))
}
