//! The chat client against a local stand-in for an OpenAI-compatible server.

mod common;

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use structind::agent::{Policy, ScriptedHuman};
use structind::engine::{Engine, RunConfig, RunStatus};
use structind::llm::{ChatMessage, ChatModel, ChatRequest, LlmConfig, LlmError, OpenAiClient, Purpose, Role};

#[derive(Clone)]
enum Reply {
    Json(u16, Value),
    Sse(Vec<String>),
}

#[derive(Default)]
struct Server {
    replies: Mutex<VecDeque<Reply>>,
    seen: Mutex<Vec<(Option<String>, Value)>>,
}

async fn completions(State(s): State<Arc<Server>>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    let auth = headers.get("authorization").map(|v| v.to_str().unwrap().to_string());
    s.seen.lock().unwrap().push((auth, body));
    let reply = s.replies.lock().unwrap().pop_front();
    match reply {
        Some(Reply::Json(code, v)) => (StatusCode::from_u16(code).unwrap(), Json(v)).into_response(),
        Some(Reply::Sse(chunks)) => {
            let mut text = String::new();
            for c in chunks {
                let chunk = json!({ "choices": [{ "delta": { "content": c } }] });
                text.push_str(&format!("data: {chunk}\n\n"));
            }
            text.push_str("data: [DONE]\n\n");
            ([("content-type", "text/event-stream")], text).into_response()
        }
        None => (StatusCode::INTERNAL_SERVER_ERROR, "script exhausted").into_response(),
    }
}

fn start(replies: Vec<Reply>) -> (Arc<Server>, SocketAddr) {
    let server = Arc::new(Server {
        replies: Mutex::new(replies.into()),
        ..Server::default()
    });
    let app = Router::new()
        .route("/v1/chat/completions", post(completions))
        .with_state(server.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (server, rx.recv().unwrap())
}

fn answer(text: &str) -> Reply {
    Reply::Json(
        200,
        json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] }),
    )
}

fn client(addr: SocketAddr, stream: bool) -> OpenAiClient {
    let config = LlmConfig {
        endpoint: format!("http://{addr}/v1"),
        model: "test-model".into(),
        stream,
        timeout_secs: 10,
        ..LlmConfig::default()
    };
    OpenAiClient::new(config, Some("sk-test-123".into()))
        .unwrap()
        .with_backoff(Duration::from_millis(1))
}

fn request(text: &str) -> ChatRequest {
    ChatRequest {
        messages: vec![ChatMessage::new(Role::User, text)],
        purpose: Purpose::Summary,
    }
}

#[test]
fn sends_model_temperature_and_key() {
    let (server, addr) = start(vec![answer("hello")]);
    let mut c = client(addr, false);
    assert_eq!(c.complete(&request("hi")).unwrap(), "hello");
    let seen = server.seen.lock().unwrap();
    let (auth, body) = &seen[0];
    assert_eq!(auth.as_deref(), Some("Bearer sk-test-123"));
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 1.0);
    assert_eq!(body["messages"], json!([{ "role": "user", "content": "hi" }]));
}

#[test]
fn streamed_deltas_reach_the_sink_in_order() {
    let (_, addr) = start(vec![Reply::Sse(vec!["Here ".into(), "is ".into(), "code.".into()])]);
    let got = Arc::new(Mutex::new(Vec::new()));
    let sink = got.clone();
    let mut c = client(addr, true).on_delta(move |d| sink.lock().unwrap().push(d.to_string()));
    assert_eq!(c.complete(&request("hi")).unwrap(), "Here is code.");
    assert_eq!(*got.lock().unwrap(), ["Here ", "is ", "code."]);
}

#[test]
fn server_errors_are_retried() {
    let (server, addr) = start(vec![
        Reply::Json(500, json!({ "error": "boom" })),
        Reply::Json(429, json!({ "error": "slow down" })),
        answer("third time"),
    ]);
    let mut c = client(addr, false);
    assert_eq!(c.complete(&request("hi")).unwrap(), "third time");
    assert_eq!(server.seen.lock().unwrap().len(), 3);
}

#[test]
fn retries_run_out() {
    let (server, addr) = start(vec![Reply::Json(503, json!({ "error": "down" })); 3]);
    let err = client(addr, false).complete(&request("hi")).unwrap_err();
    assert!(matches!(err, LlmError::Transport { attempts: 3, .. }), "{err:?}");
    assert_eq!(server.seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried_and_the_key_is_redacted() {
    let (server, addr) = start(vec![Reply::Json(401, json!({ "error": "bad key sk-test-123" }))]);
    let err = client(addr, false).complete(&request("hi")).unwrap_err();
    assert_eq!(server.seen.lock().unwrap().len(), 1);
    let text = err.to_string();
    assert!(text.contains("401") && !text.contains("sk-test-123"), "{text}");
}

#[test]
fn context_overflow_is_reported_as_oversize() {
    let (_, addr) = start(vec![Reply::Json(
        400,
        json!({ "error": { "code": "context_length_exceeded", "message": "too long" } }),
    )]);
    let err = client(addr, false).complete(&request("hi")).unwrap_err();
    assert_eq!(err.kind(), "oversize");
}

#[test]
fn engine_runs_against_the_server() {
    let reply = "Sum the numbers.\n\n```python\nprint(sum(map(int, open('data/numbers.txt'))))\n```\n";
    let (server, addr) = start(vec![answer(reply)]);
    let mut llm = client(addr, false);
    let mut human = ScriptedHuman::uniform(Policy::always_ratify());
    let bg = structind::cli::load_dfd(&common::fixtures().join("trivial.dfd.json")).unwrap();
    let state = Engine::new(&mut llm, &mut human)
        .execute(&bg, &RunConfig::default())
        .unwrap();
    assert_eq!(state.status, RunStatus::Done);
    assert!(state.assembled_program().as_str().unwrap().contains("print(sum("));
    let seen = server.seen.lock().unwrap();
    let prompt = seen[0].1["messages"].to_string();
    assert!(prompt.contains("Read the numbers, one per line"), "{prompt}");
}
