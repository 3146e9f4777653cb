//! Record a run, then re-execute it from the log alone and compare.

use std::path::Path;
use std::sync::Arc;

use structind::agent::{HumanPolicy, ScriptedHuman};
use structind::clock::LogicalClock;
use structind::engine::RunConfig;
use structind::llm::ScriptedLlm;
use structind::store::{metrics, replay, run_checkpointed, Store};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/phy");
    let tmp = tempfile::tempdir().unwrap();
    let store = Store::open(tmp.path()).unwrap();
    let background = structind::cli::load_dfd(&dir.join("dfd.json")).unwrap();
    let mut llm = ScriptedLlm::load(&dir.join("llm.json")).unwrap();
    let mut human = ScriptedHuman::new(HumanPolicy::load(&dir.join("human.json")).unwrap());
    run_checkpointed(
        &store,
        "phy",
        &background,
        &RunConfig::default(),
        &mut llm,
        &mut human,
        None,
        Arc::new(LogicalClock::new()),
    )
    .unwrap();

    let record = store.load("phy").unwrap();
    let report = replay(&record).unwrap();
    println!(
        "replayed {} sessions, {} messages, {} model answers, {} evaluations: {}",
        report.sessions,
        report.messages,
        report.llm_replayed,
        report.evaluations_replayed,
        if report.is_faithful() { "faithful" } else { "diverged" }
    );
    println!("{}", serde_json::to_string_pretty(&metrics(&record)).unwrap());
}
