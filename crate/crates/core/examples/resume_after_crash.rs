//! A run whose operator walks away half way, picked up again from its
//! checkpoint. The recorded part is re-checked, not re-asked.

use std::path::Path;
use std::sync::Arc;

use structind::agent::{AgentError, EvalRequest, Evaluation, HumanAgent, HumanPolicy, ScriptedHuman};
use structind::clock::LogicalClock;
use structind::engine::RunConfig;
use structind::llm::ScriptedLlm;
use structind::store::{metrics, resume, run_checkpointed, Store};

/// Answers like `inner` for `left` evaluations, then disconnects.
struct Leaving {
    inner: ScriptedHuman,
    left: usize,
}

impl HumanAgent for Leaving {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<Evaluation, AgentError> {
        if self.left == 0 {
            return Err(AgentError::Disconnected);
        }
        self.left -= 1;
        self.inner.evaluate(request)
    }
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/phy");
    let tmp = tempfile::tempdir().unwrap();
    let store = Store::open(tmp.path()).unwrap();
    let background = structind::cli::load_dfd(&dir.join("dfd.json")).unwrap();
    let policy = HumanPolicy::load(&dir.join("human.json")).unwrap();
    let clock = Arc::new(LogicalClock::new());

    let mut llm = ScriptedLlm::load(&dir.join("llm.json")).unwrap();
    let mut human = Leaving {
        inner: ScriptedHuman::new(policy.clone()),
        left: 6,
    };
    let err = run_checkpointed(
        &store,
        "phy",
        &background,
        &RunConfig::default(),
        &mut llm,
        &mut human,
        None,
        clock.clone(),
    )
    .unwrap_err();
    let before = metrics(&store.load("phy").unwrap());
    println!("interrupted: {err}; {} evaluations on disk", before.interactions);

    let llm = Box::new(ScriptedLlm::load(&dir.join("llm.json")).unwrap());
    let human = Box::new(ScriptedHuman::new(policy));
    let state = resume(&store, "phy", llm, human, None, clock).unwrap();
    println!(
        "resumed: {:?}, {} evaluations in total",
        state.status,
        state.interactions()
    );
}
