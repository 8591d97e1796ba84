mod common;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn login(app: &Router) -> String {
    let (status, body) = call(
        app,
        Method::POST,
        "/sessions",
        Some(json!({"username": "alice", "password": "wonderland"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["personas"].as_array().unwrap().len(), 5);
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn scripted_session_over_http() {
    let app = satbot_service::router(common::service());
    let id = login(&app).await;

    let (status, turn) = call(&app, Method::POST, &format!("/sessions/{id}/persona"), Some(json!({"persona": "olivia"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(turn["input_mode"], "free_text");
    assert_eq!(turn["utterances"][0]["source"]["kind"], "pool");

    let msg = format!("/sessions/{id}/messages");
    let (status, turn) = call(&app, Method::POST, &msg, Some(json!({"text": "I'm furious at my brother"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(turn["detected_emotion"], "anger");
    assert_eq!(turn["input_mode"], "choice");
    assert_eq!(turn["choices"], json!(["yes", "no"]));

    for c in ["no", "no", "no"] {
        let (status, _) = call(&app, Method::POST, &msg, Some(json!({"choice": c}))).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, turn) = call(&app, Method::GET, &format!("/sessions/{id}/suggestions"), None).await;
    assert_eq!(turn["suggestions"][0]["id"], 2);

    let (status, body) = call(&app, Method::POST, &msg, Some(json!({"choice": "sometimes"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "invalid_input");
    assert_eq!(body["remaining_attempts"], 2);

    let (status, _) = call(&app, Method::POST, &msg, Some(json!({"text": "a", "choice": "b"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, Method::POST, &msg, Some(json!({"choice": "yes"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn error_statuses() {
    let app = satbot_service::router(common::service());
    let (status, body) = call(&app, Method::POST, "/sessions", Some(json!({"username": "alice", "password": "x"}))).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(body["error"], "unauthorized");

    let (status, personas) = call(&app, Method::GET, "/personas", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(personas[4]["name"], "Olivia");

    let id = login(&app).await;
    let persona = format!("/sessions/{id}/persona");
    let (status, _) = call(&app, Method::POST, &persona, Some(json!({"persona": "zelda"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, Method::POST, &format!("/sessions/{id}/messages"), Some(json!({"text": "hi"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    call(&app, Method::POST, &persona, Some(json!({"persona": "kai"}))).await;
    let (status, _) = call(&app, Method::POST, &persona, Some(json!({"persona": "kai"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let msg = format!("/sessions/{id}/messages");
    call(&app, Method::POST, &msg, Some(json!({"text": "I feel great today"}))).await;
    let (_, turn) = call(&app, Method::POST, &msg, Some(json!({"choice": "not_now"}))).await;
    assert_eq!(turn["ended"], true);
    let (status, body) = call(&app, Method::POST, &msg, Some(json!({"choice": "not_now"}))).await;
    assert_eq!(status, StatusCode::GONE);
    assert_eq!(body["error"], "session_ended");

    let (status, _) = call(&app, Method::GET, "/sessions/nope/suggestions", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn safety_turn_over_http() {
    let app = satbot_service::router(common::service());
    let id = login(&app).await;
    call(&app, Method::POST, &format!("/sessions/{id}/persona"), Some(json!({"persona": "arman"}))).await;
    let (status, turn) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/messages"),
        Some(json!({"text": "I have been thinking about suicide"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(turn["node"], "safety");
    assert_eq!(turn["safety"]["matched_phrase"], "suicide");
    assert_eq!(turn["suggestions"], Value::Null);
    assert_eq!(turn["utterances"][0]["source"]["kind"], "static");
}
