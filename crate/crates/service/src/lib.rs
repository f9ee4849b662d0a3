//! Session service for human-answered alignment runs.
//!
//! Each session wraps a suspended bisection (or a sequence of them for
//! sample-level alignment) and is persisted as an append-only event log.
//! Replaying the log rebuilds the session exactly.

mod api;
mod session;
mod spec;
mod stimulus;
mod store;

use serde::Serialize;
use thiserror::Error;

pub use api::{router, serve};
pub use session::{
    AnswerSubmission, AnswerView, EventBody, Posterior, Progress, QueryView, Session, SessionEvent, SessionResult,
    SessionState, SessionSummary, Status, SubmitReply, TerminatedPayload,
};
pub use spec::{dot_template, AssSpec, DotSpec, ScalarSpec, TaskKind, TaskSpec};
pub use stimulus::{generate_stimulus, DotStimulus, MAX_DOTS, MIN_SEPARATION};
pub use store::SessionStore;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid request: {}", .0.iter().map(|f| format!("{}: {}", f.field, f.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("event log does not replay: {0}")]
    Corrupt(String),
    #[error("engine failure: {0}")]
    Engine(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Self {
        Self::Invalid(vec![FieldError { field: field.into(), message: message.into() }])
    }
}
