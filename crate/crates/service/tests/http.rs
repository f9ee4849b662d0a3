use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use pbalign_service::{router, SessionStore};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn json_of(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn dot_body(granularity: i64) -> Value {
    json!({ "kind": "dot-count", "count_min": 0, "count_max": 128, "granularity": granularity, "truth": 40, "seed": 3 })
}

#[tokio::test]
async fn session_round_trip_over_http() {
    let app = router(Arc::new(SessionStore::in_memory()));

    let (code, body) = call(&app, "POST", "/sessions", Some(dot_body(20))).await;
    assert_eq!(code, StatusCode::CREATED);
    let created = json_of(&body);
    assert!(!body.contains("truth") && !body.contains("theta_star"));
    let id = created["session_id"].as_str().unwrap().to_string();
    assert_eq!(created["query"]["c_minus"], 54.0);
    assert_eq!(created["query"]["c_plus"], 74.0);
    assert_eq!(created["query"]["stimulus"]["points"].as_array().unwrap().len(), 40);

    let (code, body) = call(&app, "GET", &format!("/sessions/{id}/query"), None).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(json_of(&body)["query_id"], 0);

    let ans = json!({ "query_id": 0, "choice": "minus", "displayed_order": ["plus", "minus"] });
    let (code, first) = call(&app, "POST", &format!("/sessions/{id}/answers"), Some(ans.clone())).await;
    assert_eq!(code, StatusCode::OK);
    let (code, again) = call(&app, "POST", &format!("/sessions/{id}/answers"), Some(ans)).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(first, again);

    let (code, _) = call(&app, "POST", &format!("/sessions/{id}/answers"), Some(json!({ "query_id": 0, "choice": "plus" }))).await;
    assert_eq!(code, StatusCode::CONFLICT);
    let (code, _) = call(&app, "POST", &format!("/sessions/{id}/answers"), Some(json!({ "query_id": 9, "choice": "plus" }))).await;
    assert_eq!(code, StatusCode::CONFLICT);

    let (code, body) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(code, StatusCode::OK);
    let state = json_of(&body);
    assert_eq!(state["status"], "awaiting-answer");
    assert_eq!(state["history"].as_array().unwrap().len(), 1);
    assert_eq!(state["state_hash"].as_str().unwrap().len(), 64);

    let (code, body) = call(&app, "GET", &format!("/sessions/{id}/export"), None).await;
    assert_eq!(code, StatusCode::OK);
    assert_eq!(body, "theta,theta_star,correct\n");
    let (_, body) = call(&app, "GET", &format!("/sessions/{id}/export?format=jsonl"), None).await;
    assert_eq!(body.lines().count(), 4);
    assert!(!body.contains("\"truth\":40"));

    let (code, _) = call(&app, "POST", &format!("/sessions/{id}/abort"), Some(json!({ "reason": "test" }))).await;
    assert_eq!(code, StatusCode::OK);
    let (_, body) = call(&app, "GET", &format!("/sessions/{id}/export"), None).await;
    assert_eq!(body.lines().count(), 2);
    let (code, _) = call(&app, "GET", &format!("/sessions/{id}/query"), None).await;
    assert_eq!(code, StatusCode::CONFLICT);

    let (_, body) = call(&app, "GET", "/sessions", None).await;
    assert_eq!(json_of(&body).as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn bad_requests_are_rejected() {
    let app = router(Arc::new(SessionStore::in_memory()));
    for g in [0, -4, 15] {
        let (code, body) = call(&app, "POST", "/sessions", Some(dot_body(g))).await;
        assert_eq!(code, StatusCode::BAD_REQUEST, "granularity {g}");
        let fields = json_of(&body)["fields"].clone();
        let named = fields[0]["field"].as_str().unwrap();
        assert!(named == "granularity" || named == "body", "{body}");
    }
    let (code, _) = call(&app, "GET", "/sessions/not-a-uuid", None).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    let (code, _) = call(&app, "GET", &format!("/sessions/{}", uuid_like()), None).await;
    assert_eq!(code, StatusCode::NOT_FOUND);
    let scalar = json!({
        "kind": "scalar-alignment",
        "config": { "epsilon": 0.01, "delta": 0.05, "granularity": 0.01, "a": 0.1, "eta": 0.1, "p": 0.75,
                    "beta_theta": 1.0, "kappa": 1.0, "lambda_delta": 1.0, "gamma": 1.0 }
    });
    let (code, body) = call(&app, "POST", "/sessions", Some(scalar)).await;
    assert_eq!(code, StatusCode::CREATED, "{body}");
    assert_eq!(json_of(&body)["query"]["theta"], 0.0);
}

fn uuid_like() -> &'static str {
    "00000000-0000-4000-8000-000000000000"
}
