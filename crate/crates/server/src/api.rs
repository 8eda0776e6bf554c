use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use batchlab::session::{Advance, CommittedStrategy, Payoff, SessionView};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tower_http::services::{ServeDir, ServeFile};
use tower_http::trace::TraceLayer;

use crate::error::ApiError;
use crate::store::{CreateRequest, Store};

type AppState = State<Arc<Store>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionBody {
    claim: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommitBody {
    strategy: CommittedStrategy,
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("bad body: {e}")))
}

/// API routes; with `static_dir`, every other path serves the built UI.
pub fn router(store: Arc<Store>, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(view))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/decision", post(decision))
        .route("/sessions/{id}/commit", post(commit))
        .route("/sessions/{id}/payoff", get(payoff))
        .route("/sessions/{id}/log", get(log))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(store);
    let app = match static_dir {
        Some(dir) => {
            let index = ServeFile::new(dir.join("index.html"));
            api.fallback_service(ServeDir::new(dir).fallback(index))
        }
        None => api,
    };
    app.layer(TraceLayer::new_for_http())
}

async fn create(State(store): AppState, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateRequest = parse(&body)?;
    let handle = store.create(&req)?;
    let view = handle
        .lock()
        .map_err(|_| ApiError::Internal("session state poisoned".into()))?
        .session
        .view();
    tracing::info!(id = %view.id, treatment = %req.treatment, mode = ?req.mode, "session created");
    Ok((StatusCode::CREATED, Json(view)))
}

async fn view(State(store): AppState, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    store.read(&id, |s| s.view()).map(Json)
}

/// An empty body runs to the next decision.
async fn advance(
    State(store): AppState,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let how = if body.iter().all(u8::is_ascii_whitespace) {
        Advance::ToDecision
    } else {
        parse(&body)?
    };
    store.mutate(&id, |s| s.advance(how)).map(Json)
}

async fn decision(
    State(store): AppState,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let DecisionBody { claim } = parse(&body)?;
    store.mutate(&id, |s| s.submit_decision(claim)).map(Json)
}

async fn commit(
    State(store): AppState,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let CommitBody { strategy } = parse(&body)?;
    store.mutate(&id, |s| s.commit(strategy)).map(Json)
}

async fn payoff(State(store): AppState, UrlPath(id): UrlPath<String>) -> Result<Json<Payoff>, ApiError> {
    store.read(&id, |s| s.payoff())?.map(Json).map_err(ApiError::from)
}

async fn log(State(store): AppState, UrlPath(id): UrlPath<String>) -> Result<impl IntoResponse, ApiError> {
    let text = store.read(&id, |s| s.log_jsonl())?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text))
}
