//! The two bundled pipelines, run against their recorded model answers and
//! human evaluations.

use std::path::Path;
use std::sync::Arc;

use structind::agent::{HumanPolicy, ScriptedHuman};
use structind::clock::LogicalClock;
use structind::engine::RunConfig;
use structind::llm::ScriptedLlm;
use structind::store::{metrics, run_checkpointed, Store};

fn run(name: &str, store: &Store) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    let background = structind::cli::load_dfd(&dir.join("dfd.json")).unwrap();
    let mut llm = ScriptedLlm::load(&dir.join("llm.json")).unwrap();
    let mut human = ScriptedHuman::new(HumanPolicy::load(&dir.join("human.json")).unwrap());
    let state = run_checkpointed(
        store,
        name,
        &background,
        &RunConfig::default(),
        &mut llm,
        &mut human,
        None,
        Arc::new(LogicalClock::new()),
    )
    .unwrap();

    let m = metrics(&store.load(name).unwrap());
    println!(
        "{name}: {:?}, {} interactions, {} machine calls",
        state.status, m.interactions, m.machine_calls
    );
    for s in &state.sessions {
        println!(
            "  {:<3} {} evaluations, {}",
            s.process_id,
            s.human_interactions(),
            s.outcome.as_ref().map_or("open", |o| o.as_str())
        );
    }
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    run("phy", &store);
    run("bio", &store);
}
