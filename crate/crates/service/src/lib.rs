//! HTTP inference service. Each session caches the recurrent state of its
//! conversation, so a completed round costs one model step.
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | POST | `/v1/sessions` | `{issue_id?, meta}` | `{session_id, round, issue_id, warnings, suggestions}` |
//! | POST | `/v1/sessions/{id}/messages` | `{speaker, text, end_of_turn}` | `{round, round_completed, suggestions?}` |
//! | GET | `/v1/sessions/{id}/suggestions` | | `{round, suggestions}` |
//! | DELETE | `/v1/sessions/{id}` | | `{closed: true}` |
//! | GET | `/healthz` | | `{status, variant, candidates, sessions}` |

mod engine;
mod error;
mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use smartreply_core::corpus::{Speaker, TicketMeta};

pub use engine::{Engine, EnginePaths, IssueRef, Session, Suggestion};
pub use error::ServiceError;
pub use store::{SessionStore, SharedSession};

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    pub store: Arc<SessionStore>,
}

impl AppState {
    pub fn new(engine: Engine, ttl: Duration) -> Self {
        AppState {
            engine: Arc::new(engine),
            store: Arc::new(SessionStore::new(ttl)),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub issue_id: Option<IssueRef>,
    #[serde(default)]
    pub meta: TicketMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub round: usize,
    pub issue_id: Option<usize>,
    pub warnings: Vec<String>,
    pub suggestions: Vec<Suggestion>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PostMessage {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default)]
    pub end_of_turn: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageAccepted {
    pub round: usize,
    pub round_completed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestions: Option<Vec<Suggestion>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestionList {
    pub round: usize,
    pub suggestions: Vec<Suggestion>,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

fn session(state: &AppState, id: &str) -> Result<SharedSession, ServiceError> {
    state.store.get(id).ok_or_else(|| ServiceError::NotFound(id.to_string()))
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Json<SessionCreated>, ServiceError> {
    let req = body(payload)?;
    let id = uuid::Uuid::new_v4().to_string();
    let session = state.engine.open(id.clone(), req.meta, req.issue_id.as_ref());
    let created = SessionCreated {
        session_id: id,
        round: session.round(),
        issue_id: session.issue_id,
        warnings: session.warnings.clone(),
        suggestions: state.engine.suggestions(&session)?,
    };
    if !created.warnings.is_empty() {
        tracing::warn!(session = %created.session_id, warnings = ?created.warnings, "session opened with warnings");
    }
    state.store.insert(session);
    Ok(Json(created))
}

async fn post_message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<PostMessage>, JsonRejection>,
) -> Result<Json<MessageAccepted>, ServiceError> {
    let shared = session(&state, &id)?;
    let msg = body(payload)?;
    let mut session = shared.lock().await;
    let completed = state.engine.post(&mut session, msg.speaker, &msg.text, msg.end_of_turn)?;
    Ok(Json(MessageAccepted {
        round: session.round(),
        round_completed: completed,
        suggestions: if completed {
            Some(state.engine.suggestions(&session)?)
        } else {
            None
        },
    }))
}

async fn get_suggestions(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SuggestionList>, ServiceError> {
    let shared = session(&state, &id)?;
    let session = shared.lock().await;
    Ok(Json(SuggestionList {
        round: session.round(),
        suggestions: state.engine.suggestions(&session)?,
    }))
}

async fn close_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ServiceError> {
    if state.store.remove(&id) {
        Ok(Json(serde_json::json!({ "closed": true })))
    } else {
        Err(ServiceError::NotFound(id))
    }
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "variant": state.engine.model().variant(),
        "candidates": state.engine.catalog().len(),
        "sessions": state.store.len(),
    }))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/messages", post(post_message))
        .route("/v1/sessions/{id}/suggestions", get(get_suggestions))
        .route("/v1/sessions/{id}", axum::routing::delete(close_session))
        .route("/healthz", get(health))
        .with_state(state)
}

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub bind: SocketAddr,
    pub ttl: Duration,
    /// Sessions are restored from this file at start-up (when it exists) and written back on shutdown.
    pub snapshot: Option<PathBuf>,
}

/// Periodically evicts idle sessions.
pub fn spawn_sweeper(store: Arc<SessionStore>) -> tokio::task::JoinHandle<()> {
    let period = (store.ttl() / 4).clamp(Duration::from_millis(10), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let evicted = store.sweep();
            if evicted > 0 {
                tracing::debug!(evicted, "expired sessions evicted");
            }
        }
    })
}

/// Runs the service until `shutdown` resolves, then writes the snapshot.
pub async fn serve(
    engine: Engine,
    config: ServeConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let state = AppState::new(engine, config.ttl);
    if let Some(path) = config.snapshot.as_deref().filter(|p| p.exists()) {
        let n = state.store.load_snapshot(path)?;
        tracing::info!(sessions = n, path = %path.display(), "restored sessions");
    }
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|e| ServiceError::Startup(format!("bind {}: {e}", config.bind)))?;
    tracing::info!(addr = %listener.local_addr().map_err(|e| ServiceError::Startup(e.to_string()))?, "listening");
    let sweeper = spawn_sweeper(state.store.clone());
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ServiceError::Startup(e.to_string()))?;
    sweeper.abort();
    if let Some(path) = &config.snapshot {
        let n = state.store.save_snapshot(path).await?;
        tracing::info!(sessions = n, path = %path.display(), "snapshot written");
    }
    Ok(())
}
