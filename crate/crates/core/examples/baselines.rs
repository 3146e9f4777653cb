//! Structured interaction against the two unstructured baselines on the
//! same pipeline and the same model answers.

use std::path::Path;

use structind::agent::{HumanPolicy, Policy, ScriptedHuman};
use structind::engine::{Engine, Mode, RunConfig};
use structind::llm::ScriptedLlm;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/phy");
    let background = structind::cli::load_dfd(&dir.join("dfd.json")).unwrap();
    let mut policy = HumanPolicy::load(&dir.join("human.json")).unwrap();
    // The whole-task baselines never get past review here.
    policy.baseline = Some(Policy::always_refute());

    for mode in [Mode::Structured, Mode::LlmK { budget: 13 }, Mode::Llm0] {
        let mut llm = ScriptedLlm::load(&dir.join("llm.json")).unwrap();
        let mut human = ScriptedHuman::new(policy.clone());
        let config = RunConfig {
            mode,
            ..RunConfig::default()
        };
        let state = Engine::new(&mut llm, &mut human).execute(&background, &config).unwrap();
        let lines = state.assembled_program().as_str().map_or(0, |p| p.lines().count());
        println!(
            "{:<10} {:?}: {} machine calls, {} interactions, {lines} lines",
            mode.name(),
            state.status,
            state.machine_calls(),
            state.interactions()
        );
    }
}
