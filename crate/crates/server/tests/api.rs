use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use batchlab::session::{parse_log, LogRecord, Payoff, SessionStatus, SessionView};
use batchlab_server::{build_store, router, Config, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(log_dir: Option<&Path>, static_dir: Option<&Path>) -> (Arc<Store>, Router) {
    let config = Config {
        log_dir: log_dir.map(Path::to_path_buf),
        ..Config::default()
    };
    let store = build_store(&config).unwrap();
    (store.clone(), router(store, static_dir))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let body = body.map_or_else(Body::empty, |v| Body::from(v.to_string()));
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn json_call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, body: Value) -> SessionView {
    let (status, v) = json_call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    serde_json::from_value(v).unwrap()
}

async fn view(app: &Router, uri: &str, body: Option<Value>) -> SessionView {
    let (status, v) = json_call(app, "POST", uri, body).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    serde_json::from_value(v).unwrap()
}

/// Claims one patient at every prompt until the shift ends.
async fn finish(app: &Router, id: &str) {
    let (_, v) = json_call(app, "GET", &format!("/sessions/{id}"), None).await;
    let mut v: SessionView = serde_json::from_value(v).unwrap();
    loop {
        if v.status == SessionStatus::Running {
            v = view(app, &format!("/sessions/{id}/advance"), None).await;
        }
        match v.status {
            SessionStatus::Finished => return,
            SessionStatus::AwaitingDecision => {
                v = view(app, &format!("/sessions/{id}/decision"), Some(json!({"claim": 1}))).await;
            }
            SessionStatus::Running => {}
        }
    }
}

#[tokio::test]
async fn unknown_session_is_404() {
    let (_, app) = app(None, None);
    let (status, body) = json_call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");
    let (status, _) = json_call(&app, "POST", "/sessions/nope/advance", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn live_session_runs_to_a_payoff() {
    let (_, app) = app(None, None);
    let v = create(&app, json!({"treatment": "IT", "seed": 7})).await;
    assert_eq!(v.status, SessionStatus::Running);
    assert_eq!(v.clock, 0.0);
    let id = v.id;

    let (status, _) = json_call(&app, "GET", &format!("/sessions/{id}/payoff"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let v = view(&app, &format!("/sessions/{id}/advance"), Some(json!({"mode": "step"}))).await;
    assert!(v.clock > 0.0);
    let v = match v.status {
        SessionStatus::Running => view(&app, &format!("/sessions/{id}/advance"), None).await,
        _ => v,
    };
    assert_eq!(v.status, SessionStatus::AwaitingDecision);
    let pending = v.pending_decision.unwrap();
    assert!(pending.max_claim >= 1);

    finish(&app, &id).await;
    let (status, body) = json_call(&app, "GET", &format!("/sessions/{id}/payoff"), None).await;
    assert_eq!(status, StatusCode::OK);
    let payoff: Payoff = serde_json::from_value(body).unwrap();
    assert_eq!(payoff.total, payoff.base_fee + payoff.bonus);

    let (status, _) = json_call(&app, "POST", &format!("/sessions/{id}/advance"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn bad_requests_are_400() {
    let (_, app) = app(None, None);
    let (status, _) = json_call(&app, "POST", "/sessions", Some(json!({"treatment": "XX"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = json_call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"treatment": "GT", "seed": 1, "path_id": "path-1"})),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) =
        json_call(&app, "POST", "/sessions", Some(json!({"treatment": "GT", "path_id": "path-9"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let id = create(&app, json!({"treatment": "GT", "path_id": "path-1"})).await.id;
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/advance"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) =
        json_call(&app, "POST", &format!("/sessions/{id}/advance"), Some(json!({"mode": "warp"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) =
        json_call(&app, "POST", &format!("/sessions/{id}/decision"), Some(json!({"claim": 3}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    let (status, _) =
        json_call(&app, "POST", &format!("/sessions/{id}/decision"), Some(json!({"claim": "one"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn claims_outside_one_to_max_are_rejected() {
    let (_, app) = app(None, None);
    let id = create(&app, json!({"treatment": "IT", "seed": 3})).await.id;
    let v = view(&app, &format!("/sessions/{id}/advance"), None).await;
    let pending = v.pending_decision.unwrap();
    assert!(pending.available >= 2);
    for claim in [0, pending.max_claim + 1] {
        let (status, _) =
            json_call(&app, "POST", &format!("/sessions/{id}/decision"), Some(json!({"claim": claim}))).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
    }
    let v = view(&app, &format!("/sessions/{id}/decision"), Some(json!({"claim": pending.max_claim}))).await;
    assert_eq!(v.focal.waiting.len() as u32 + 1, pending.max_claim);
}

#[allow(clippy::await_holding_lock)] // holding it is the point
#[tokio::test]
async fn concurrent_mutation_is_409() {
    let (store, app) = app(None, None);
    let id = create(&app, json!({"treatment": "IT", "seed": 1})).await.id;
    let handle = store.get(&id).unwrap();
    let guard = handle.lock().unwrap();
    let (status, body) = json_call(&app, "POST", &format!("/sessions/{id}/advance"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "busy");
    drop(guard);
    let (status, _) = json_call(&app, "POST", &format!("/sessions/{id}/advance"), None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn committed_mode() {
    let (_, app) = app(None, None);
    let id = create(&app, json!({"treatment": "GT_ST", "mode": "committed", "path_id": "path-2"})).await.id;
    let (status, _) = json_call(&app, "POST", &format!("/sessions/{id}/advance"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) =
        json_call(&app, "POST", &format!("/sessions/{id}/commit"), Some(json!({"strategy": "assign_three"})))
            .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v = view(&app, &format!("/sessions/{id}/commit"), Some(json!({"strategy": "assign_two"}))).await;
    assert_eq!(v.status, SessionStatus::Finished);
    let (status, _) =
        json_call(&app, "POST", &format!("/sessions/{id}/commit"), Some(json!({"strategy": "assign_one"})))
            .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = json_call(&app, "GET", &format!("/sessions/{id}/payoff"), None).await;
    assert_eq!(status, StatusCode::OK);

    let live = create(&app, json!({"treatment": "IT", "seed": 2})).await.id;
    let (status, _) =
        json_call(&app, "POST", &format!("/sessions/{live}/commit"), Some(json!({"strategy": "assign_one"})))
            .await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn nudge_text_only_in_the_nudge_treatment() {
    let (_, app) = app(None, None);
    let v = create(&app, json!({"treatment": "GT_NUDGE", "seed": 5})).await;
    assert_eq!(v.nudge_text.as_deref(), Some(batchlab::calibration::NUDGE_TEXT));
    let v = create(&app, json!({"treatment": "GT", "seed": 5})).await;
    assert!(v.nudge_text.is_none());
}

#[tokio::test]
async fn log_is_appended_and_sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (_, first) = app(Some(dir.path()), None);
    let done = create(&first, json!({"treatment": "GT", "seed": 11})).await.id;
    finish(&first, &done).await;
    let open = create(&first, json!({"treatment": "IT", "seed": 12})).await.id;
    let before = view(&first, &format!("/sessions/{open}/advance"), None).await;
    assert_eq!(before.status, SessionStatus::AwaitingDecision);

    let (status, served) = call(&first, "GET", &format!("/sessions/{done}/log"), None).await;
    assert_eq!(status, StatusCode::OK);
    let on_disk = std::fs::read(dir.path().join(format!("{done}.jsonl"))).unwrap();
    assert_eq!(served, on_disk);
    let records = parse_log(std::str::from_utf8(&on_disk).unwrap()).unwrap();
    let Some(LogRecord::Payoff(logged)) = records.last() else {
        panic!("log does not end with the payoff");
    };
    let (_, body) = json_call(&first, "GET", &format!("/sessions/{done}/payoff"), None).await;
    let payoff: Payoff = serde_json::from_value(body).unwrap();
    assert_eq!(&payoff, logged);

    let (store, second) = app(Some(dir.path()), None);
    assert_eq!(store.len(), 2);
    let (_, body) = json_call(&second, "GET", &format!("/sessions/{done}/payoff"), None).await;
    assert_eq!(serde_json::from_value::<Payoff>(body).unwrap(), payoff);
    let (_, body) = json_call(&second, "GET", &format!("/sessions/{open}"), None).await;
    let after: SessionView = serde_json::from_value(body).unwrap();
    assert_eq!(after, before);

    finish(&second, &open).await;
    let text = std::fs::read_to_string(dir.path().join(format!("{open}.jsonl"))).unwrap();
    let records = parse_log(&text).unwrap();
    let headers = records.iter().filter(|r| matches!(r, LogRecord::Header(_))).count();
    assert_eq!(headers, 1);
    assert!(matches!(records.last(), Some(LogRecord::Payoff(_))));
}

#[tokio::test]
async fn static_assets_are_served_outside_the_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>ui</html>").unwrap();
    std::fs::write(dir.path().join("app.js"), "console.log(1)").unwrap();
    let (_, app) = app(None, Some(dir.path()));
    let (status, body) = call(&app, "GET", "/app.js", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"console.log(1)");
    let (status, body) = call(&app, "GET", "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<html>ui</html>");
    let (status, body) = call(&app, "GET", "/some/client/route", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<html>ui</html>");
    let (status, _) = json_call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = call(&app, "GET", "/healthz", None).await;
    assert_eq!((status, body.as_slice()), (StatusCode::OK, b"ok".as_slice()));
}
