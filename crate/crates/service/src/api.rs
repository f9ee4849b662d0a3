//! HTTP routes over a [`SessionStore`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use uuid::Uuid;

use crate::session::AnswerSubmission;
use crate::spec::TaskSpec;
use crate::store::SessionStore;
use crate::ServiceError;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (code, body) = match &self {
            ServiceError::Invalid(fields) => (StatusCode::BAD_REQUEST, json!({ "error": "invalid", "fields": fields })),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, json!({ "error": "not-found", "message": self.to_string() })),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, json!({ "error": "conflict", "message": self.to_string() })),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": "internal", "message": self.to_string() })),
        };
        (code, Json(body)).into_response()
    }
}

type Shared = State<Arc<SessionStore>>;

fn parse_id(raw: &str) -> Result<Uuid, ServiceError> {
    Uuid::parse_str(raw).map_err(|_| ServiceError::NotFound(raw.into()))
}

/// Routes:
///
/// | method | path | |
/// |---|---|---|
/// | POST | `/sessions` | create from a task spec |
/// | GET | `/sessions` | list |
/// | GET | `/sessions/{id}` | state |
/// | GET | `/sessions/{id}/query` | outstanding query with stimulus |
/// | POST | `/sessions/{id}/answers` | submit an answer |
/// | POST | `/sessions/{id}/abort` | end without a result |
/// | GET | `/sessions/{id}/export?format=csv\|jsonl` | logs |
pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/query", get(current_query))
        .route("/sessions/{id}/answers", post(submit))
        .route("/sessions/{id}/abort", post(abort))
        .route("/sessions/{id}/export", get(export))
        .with_state(store)
}

pub async fn serve(addr: SocketAddr, store: Arc<SessionStore>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store)).await
}

async fn create(State(store): Shared, body: Result<Json<TaskSpec>, axum::extract::rejection::JsonRejection>) -> Response {
    let spec = match body {
        Ok(Json(s)) => s,
        Err(e) => return ServiceError::invalid("body", e.body_text()).into_response(),
    };
    match store.create(spec) {
        Ok(reply) => (StatusCode::CREATED, Json(reply)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn list(State(store): Shared) -> Response {
    Json(store.list()).into_response()
}

async fn state(State(store): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let id = parse_id(&id)?;
    Ok(Json(store.with_session(id, |s| Ok(s.state()))?).into_response())
}

async fn current_query(State(store): Shared, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let id = parse_id(&id)?;
    let (q, status) = store.with_session(id, |s| Ok((s.current_query(), s.status())))?;
    Ok(match q {
        Some(q) => Json(q).into_response(),
        None => (StatusCode::CONFLICT, Json(json!({ "error": "no-query", "status": status }))).into_response(),
    })
}

async fn submit(
    State(store): Shared,
    Path(id): Path<String>,
    body: Result<Json<AnswerSubmission>, axum::extract::rejection::JsonRejection>,
) -> Result<Response, ServiceError> {
    let id = parse_id(&id)?;
    let Json(answer) = body.map_err(|e| ServiceError::invalid("body", e.body_text()))?;
    let (reply, _) = store.submit(id, answer)?;
    Ok(Json(reply).into_response())
}

#[derive(Debug, Deserialize)]
struct AbortBody {
    #[serde(default)]
    reason: Option<String>,
}

async fn abort(State(store): Shared, Path(id): Path<String>, body: Option<Json<AbortBody>>) -> Result<Response, ServiceError> {
    let id = parse_id(&id)?;
    let reason = body.and_then(|Json(b)| b.reason).unwrap_or_else(|| "aborted by operator".into());
    let st = store.with_session(id, |s| {
        s.abort(&reason);
        Ok(s.state())
    })?;
    Ok(Json(st).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportParams {
    #[serde(default)]
    format: Option<String>,
}

async fn export(State(store): Shared, Path(id): Path<String>, Query(p): Query<ExportParams>) -> Result<Response, ServiceError> {
    let id = parse_id(&id)?;
    match p.format.as_deref().unwrap_or("csv") {
        "csv" => {
            let body = store.with_session(id, |s| Ok(s.export_csv()))?;
            Ok(([(header::CONTENT_TYPE, "text/csv")], body).into_response())
        }
        "jsonl" => {
            let body = store.with_session(id, |s| Ok(s.export_jsonl()))?;
            Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response())
        }
        other => Err(ServiceError::invalid("format", format!("expected csv or jsonl, got {other:?}"))),
    }
}
