//! HTTP backend for the planning user study.
//!
//! Routes:
//! `POST /session`, `GET /session/{id}/instance`, `GET /session/{id}/actions`,
//! `GET /session/{id}/suggestion`, `POST /session/{id}/plan/freeform`,
//! `POST /session/{id}/plan/translation`, `POST /session/{id}/tlx`,
//! `POST /session/{id}/end`.

use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use uuid::Uuid;

pub mod events;
pub mod study;

pub use events::{read_events, replay, EventKind, EventLog, ReplayReport, StudyEvent};
pub use study::{
    ActionEntry, Condition, ConditionPolicy, FreeformSubmission, InstanceView, Phase, SessionView, Study, StudyConfig,
    SubPhase, SuggestionView, Tlx, TlxAck, TranslationSubmission, TranslationVerdict,
};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("unknown session {0}")]
    UnknownSession(Uuid),
    #[error("not available in this session's condition")]
    ConditionViolation,
    #[error("expected sub-phase {expected:?}, session is in {actual:?}")]
    PhaseViolation { expected: SubPhase, actual: SubPhase },
    #[error("session has ended")]
    Ended,
    #[error("{0} already submitted")]
    AlreadySubmitted(&'static str),
    #[error("unknown action id {0}")]
    UnknownAction(usize),
    #[error("{0}")]
    OutOfRange(String),
    #[error("instance pool is empty")]
    PoolEmpty,
    #[error("every pool instance has been assigned")]
    PoolExhausted,
    #[error("no suggestion stored for {0}")]
    SuggestionUnavailable(String),
    #[error("bad pool: {0}")]
    BadPool(String),
    #[error("bad event log: {0}")]
    BadLog(String),
    #[error("translation: {0}")]
    Translate(#[from] planbench_core::translator::TranslateError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl StudyError {
    pub fn status(&self) -> StatusCode {
        use StudyError::*;
        match self {
            UnknownSession(_) | SuggestionUnavailable(_) => StatusCode::NOT_FOUND,
            ConditionViolation => StatusCode::FORBIDDEN,
            PhaseViolation { .. } | Ended | AlreadySubmitted(_) => StatusCode::CONFLICT,
            UnknownAction(_) | OutOfRange(_) => StatusCode::UNPROCESSABLE_ENTITY,
            PoolEmpty | PoolExhausted => StatusCode::SERVICE_UNAVAILABLE,
            BadPool(_) | BadLog(_) | Translate(_) | Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for StudyError {
    fn into_response(self) -> Response {
        (self.status(), Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

type Shared = State<Arc<Study>>;
type Reply<T> = Result<Json<T>, StudyError>;

async fn create_session(State(s): Shared) -> Result<(StatusCode, Json<SessionView>), StudyError> {
    Ok((StatusCode::CREATED, Json(s.create_session()?)))
}

async fn instance(State(s): Shared, UrlPath(id): UrlPath<Uuid>) -> Reply<InstanceView> {
    s.instance(id).map(Json)
}

async fn actions(State(s): Shared, UrlPath(id): UrlPath<Uuid>) -> Reply<Vec<ActionEntry>> {
    s.actions(id).map(Json)
}

async fn suggestion(State(s): Shared, UrlPath(id): UrlPath<Uuid>) -> Reply<SuggestionView> {
    s.suggestion(id).map(Json)
}

async fn freeform(State(s): Shared, UrlPath(id): UrlPath<Uuid>, Json(b): Json<FreeformSubmission>) -> Reply<SessionView> {
    s.submit_freeform(id, b).map(Json)
}

async fn translation(
    State(s): Shared,
    UrlPath(id): UrlPath<Uuid>,
    Json(b): Json<TranslationSubmission>,
) -> Reply<TranslationVerdict> {
    s.submit_translation(id, b).map(Json)
}

async fn tlx(State(s): Shared, UrlPath(id): UrlPath<Uuid>, Json(b): Json<Tlx>) -> Reply<TlxAck> {
    s.submit_tlx(id, b).map(Json)
}

async fn end(State(s): Shared, UrlPath(id): UrlPath<Uuid>) -> Reply<SessionView> {
    s.end(id).map(Json)
}

async fn session(State(s): Shared, UrlPath(id): UrlPath<Uuid>) -> Reply<SessionView> {
    s.session_view(id).map(Json)
}

pub fn router(study: Arc<Study>) -> Router {
    Router::new()
        .route("/session", post(create_session))
        .route("/session/{id}", get(session))
        .route("/session/{id}/instance", get(instance))
        .route("/session/{id}/actions", get(actions))
        .route("/session/{id}/suggestion", get(suggestion))
        .route("/session/{id}/plan/freeform", post(freeform))
        .route("/session/{id}/plan/translation", post(translation))
        .route("/session/{id}/tlx", post(tlx))
        .route("/session/{id}/end", post(end))
        .with_state(study)
}

/// API routes plus the built UI served from `static_dir` for all other paths.
pub fn router_with_static(study: Arc<Study>, static_dir: &Path) -> Router {
    router(study).fallback_service(tower_http::services::ServeDir::new(static_dir))
}
