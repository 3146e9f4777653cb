use axum::body::{to_bytes, Body};
use axum::http::Request;
use tower::ServiceExt;

use super::*;
use crate::agent::{HumanPolicy, Policy};
use crate::dfd::{Dfd, Edge, ProcessSpec, Vertex};

fn chain(k: usize) -> Background {
    let vertices = (1..=k)
        .map(|i| {
            Vertex::process(
                format!("P{i}"),
                ProcessSpec::new(format!("do step {i}"), format!("input {i}"), format!("output {i}")),
            )
        })
        .collect();
    let edges = (1..k)
        .map(|i| Edge::new(format!("P{i}"), format!("P{}", i + 1), "data"))
        .collect();
    Background::new(Dfd { vertices, edges }, "Analyse the data end to end.")
}

fn doc(bg: Background) -> serde_json::Value {
    serde_json::from_str(&bg.to_json()).unwrap()
}

fn service() -> (tempfile::TempDir, Arc<Service>) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    (dir, Service::new(store, ServiceOptions::default()))
}

async fn call(svc: &Arc<Service>, method: &str, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, Bytes) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = svc.clone().router().oneshot(req).await.unwrap();
    let status = res.status();
    (status, to_bytes(res.into_body(), usize::MAX).await.unwrap())
}

fn value(b: &Bytes) -> serde_json::Value {
    serde_json::from_slice(b).unwrap()
}

async fn create(svc: &Arc<Service>, body: serde_json::Value) -> String {
    let (status, b) = call(svc, "POST", "/runs", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&b));
    value(&b)["run_id"].as_str().unwrap().to_string()
}

async fn wait_done(svc: &Arc<Service>, id: &str) -> serde_json::Value {
    for _ in 0..500 {
        let (_, b) = call(svc, "GET", &format!("/runs/{id}"), None).await;
        let v = value(&b);
        if v["status"] != "running" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("run {id} did not finish");
}

async fn wait_awaiting(svc: &Arc<Service>, id: &str) -> AwaitingEvaluation {
    for _ in 0..500 {
        if let Some(a) = svc.live(id).and_then(|l| l.slot.awaiting()) {
            return a;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("run {id} never awaited an evaluation");
}

fn scripted(policy: Policy) -> serde_json::Value {
    json!({ "kind": "scripted", "policy": HumanPolicy::uniform(policy) })
}

#[tokio::test]
async fn health_answers() {
    let (_d, svc) = service();
    let (status, b) = call(&svc, "GET", "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(value(&b)["ok"], true);
}

#[tokio::test]
async fn scripted_run_finishes_and_serves_its_artifacts() {
    let (_d, svc) = service();
    let id = create(
        &svc,
        json!({ "dfd": doc(chain(2)), "human": scripted(Policy::ratify_after(1)), "run_id": "demo" }),
    )
    .await;
    assert_eq!(id, "demo");
    let view = wait_done(&svc, &id).await;
    assert_eq!(view["status"], "done");
    assert_eq!(view["metrics"]["interactions"], 4);

    let (status, program) = call(&svc, "GET", "/runs/demo/program", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8_lossy(&program).contains("# --- process P2 ---"));

    let req = Request::get("/runs/demo/sessions/0").body(Body::empty()).unwrap();
    let res = svc.clone().router().oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let digest = res.headers()["x-transcript-sha256"].to_str().unwrap().to_string();
    let text = to_bytes(res.into_body(), usize::MAX).await.unwrap();
    assert_eq!(digest, sha256_hex(std::str::from_utf8(&text).unwrap()));
    assert_eq!(text.iter().filter(|&&c| c == b'\n').count(), 6);

    let (status, _) = call(&svc, "GET", "/runs/demo/sessions/2", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (_, b) = call(&svc, "GET", "/runs", None).await;
    assert_eq!(value(&b)["runs"][0]["run_id"], "demo");
}

#[tokio::test]
async fn duplicate_run_id_conflicts() {
    let (_d, svc) = service();
    let body = json!({ "dfd": doc(chain(1)), "human": scripted(Policy::always_ratify()), "run_id": "same" });
    create(&svc, body.clone()).await;
    let (status, _) = call(&svc, "POST", "/runs", Some(body)).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn invalid_dfd_is_refused_with_findings() {
    let (_d, svc) = service();
    let mut bg = chain(2);
    bg.dfd.edges.push(Edge::new("P2", "P1", "back"));
    let (status, b) = call(&svc, "POST", "/runs", Some(json!({ "dfd": doc(bg) }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v = value(&b);
    assert_eq!(v["error"], "invalid DFD");
    assert!(!v["findings"].as_array().unwrap().is_empty());

    let (status, b) = call(&svc, "POST", "/runs", Some(json!({ "dfd": "not a dfd" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(value(&b)["error"], "malformed DFD");
}

#[tokio::test]
async fn checker_policies_need_consent() {
    let (_d, svc) = service();
    let policy = json!({ "v": 1, "default": { "checker": "true", "max_failures": 1, "then": "reject" } });
    let body = json!({ "dfd": doc(chain(1)), "human": { "kind": "scripted", "policy": policy } });
    let (status, b) = call(&svc, "POST", "/runs", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{}", String::from_utf8_lossy(&b));
    assert!(value(&b)["error"].as_str().unwrap().contains("runs generated code"));
}

#[tokio::test]
async fn bad_limits_are_refused() {
    let (_d, svc) = service();
    let body = json!({ "dfd": doc(chain(1)), "config": { "R": 0, "n": 10, "m": 6 } });
    let (status, _) = call(&svc, "POST", "/runs", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn remote_evaluations_gate_reject_and_first_write_wins() {
    let (_d, svc) = service();
    let id = create(&svc, json!({ "dfd": doc(chain(1)) })).await;
    let a = wait_awaiting(&svc, &id).await;
    assert_eq!((a.attempt, a.exchange, a.m), (1, 1, 6));
    assert!(!a.legal_tags.contains(&Tag::Reject));

    let uri = format!("/runs/{id}/evaluation");
    let (status, b) = call(&svc, "POST", &uri, Some(json!({ "token": a.token, "tag": "REJECT" }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(String::from_utf8_lossy(&b).contains("REJECT"));

    let (status, _) = call(&svc, "POST", &uri, Some(json!({ "token": a.token, "tag": "TERM" }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, _) = call(&svc, "POST", &uri, Some(json!({ "token": a.token, "tag": "RATIFY" }))).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&svc, "POST", &uri, Some(json!({ "token": a.token, "tag": "RATIFY" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let view = wait_done(&svc, &id).await;
    assert_eq!(view["status"], "done");
    assert_eq!(view["metrics"]["interactions"], 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn poll_reports_progress_and_cancel_aborts() {
    let (_d, svc) = service();
    let id = create(&svc, json!({ "dfd": doc(chain(1)) })).await;
    wait_awaiting(&svc, &id).await;
    let (status, b) = call(&svc, "GET", &format!("/runs/{id}/poll?after=0&timeout_ms=10"), None).await;
    assert_eq!(status, StatusCode::OK);
    let v = value(&b);
    assert!(v["seq"].as_u64().unwrap() > 0);
    assert_eq!(v["phase"]["state"], "awaiting_human");

    let (status, _) = call(&svc, "POST", &format!("/runs/{id}/cancel"), None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let view = wait_done(&svc, &id).await;
    assert_eq!(view["status"], "aborted");
    let (status, _) = call(&svc, "POST", &format!("/runs/{id}/cancel"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn finished_run_streams_one_phase_event() {
    let (_d, svc) = service();
    let id = create(
        &svc,
        json!({ "dfd": doc(chain(1)), "human": scripted(Policy::always_ratify()) }),
    )
    .await;
    wait_done(&svc, &id).await;
    // A fresh service has no live state for the run.
    let svc = Service::new(svc.store().clone(), ServiceOptions::default());
    let (status, b) = call(&svc, "GET", &format!("/runs/{id}/events"), None).await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8_lossy(&b);
    assert!(text.starts_with("event: phase"), "{text}");
    assert_eq!(text.matches("event:").count(), 1);
}

#[tokio::test]
async fn unknown_runs_are_not_found() {
    let (_d, svc) = service();
    for (m, uri) in [
        ("GET", "/runs/nope"),
        ("GET", "/runs/nope/program"),
        ("GET", "/runs/nope/events"),
        ("POST", "/runs/nope/cancel"),
    ] {
        let (status, _) = call(&svc, m, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{m} {uri}");
    }
    let (status, _) = call(&svc, "POST", "/runs/nope/evaluation", Some(json!({ "tag": "RATIFY" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn restarted_service_resumes_a_waiting_run() {
    let (_d, first) = service();
    let id = create(&first, json!({ "dfd": doc(chain(2)) })).await;
    let a = wait_awaiting(&first, &id).await;
    let uri = format!("/runs/{id}/evaluation");
    let (status, _) = call(&first, "POST", &uri, Some(json!({ "token": a.token, "tag": "RATIFY" }))).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let second_token = wait_awaiting(&first, &id).await.token;
    assert_ne!(second_token, a.token);

    // The first service stays blocked on its slot; a second one takes over.
    let svc = Service::new(first.store().clone(), ServiceOptions::default());
    assert_eq!(svc.recover().unwrap(), vec![id.clone()]);
    let b = wait_awaiting(&svc, &id).await;
    assert_eq!(b.token, second_token);

    // The first exchange is on disk, so resubmitting it conflicts.
    let (status, _) = call(&svc, "POST", &uri, Some(json!({ "token": a.token, "tag": "RATIFY" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&svc, "POST", &uri, Some(json!({ "tag": "RATIFY" }))).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let view = wait_done(&svc, &id).await;
    assert_eq!(view["status"], "done");
    assert_eq!(view["metrics"]["interactions"], 2);
}
