//! The HTTP service with a remote human: create a run, then answer each
//! evaluation request over the API until the run is done.

use std::time::Duration;

use serde_json::{json, Value};
use structind::service::{serve_on, Service, ServiceOptions};
use structind::store::Store;

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let service = Service::new(Store::open(tmp.path()).unwrap(), ServiceOptions::default());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        tokio::runtime::Runtime::new().unwrap().block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            serve_on(service, listener).await.unwrap();
        })
    });
    let base = format!("http://{}", rx.recv().unwrap());
    let http: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();

    let dfd: Value = serde_json::from_str(include_str!("../fixtures/phy/dfd.json")).unwrap();
    let fixture: Value = serde_json::from_str(include_str!("../fixtures/phy/llm.json")).unwrap();
    let body = json!({ "dfd": dfd, "run_id": "demo", "llm": { "kind": "mock", "fixture": fixture } });
    let status = http.post(&format!("{base}/runs")).send_json(&body).unwrap().status();
    println!("created run demo: {status}");

    loop {
        let v: Value = http
            .get(&format!("{base}/runs/demo"))
            .call()
            .unwrap()
            .body_mut()
            .read_json()
            .unwrap();
        if v["status"] != "running" {
            println!(
                "run finished: {}, {} interactions",
                v["status"], v["metrics"]["interactions"]
            );
            break;
        }
        let a = &v["awaiting"];
        if a.is_null() {
            std::thread::sleep(Duration::from_millis(5));
            continue;
        }
        // Accept the second proposal of every process.
        let eval = if a["exchange"] == 1 {
            json!({ "token": a["token"], "tag": "REFUTE", "refutation": "add a short comment per step" })
        } else {
            json!({ "token": a["token"], "tag": "RATIFY" })
        };
        println!("{} exchange {}: {}", a["process"], a["exchange"], eval["tag"]);
        http.post(&format!("{base}/runs/demo/evaluation"))
            .send_json(&eval)
            .unwrap();
    }
    let program = http
        .get(&format!("{base}/runs/demo/program"))
        .call()
        .unwrap()
        .body_mut()
        .read_to_string()
        .unwrap();
    println!("{} lines assembled", program.lines().count());
}
