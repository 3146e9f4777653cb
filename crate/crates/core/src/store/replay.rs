use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Checkpointer, RunRecord, Store, StoreError, Tee};
use crate::agent::{HumanAgent, RecordedHuman};
use crate::clock::{Clock, LogicalClock};
use crate::engine::{Divergence, Engine, EngineError, Observer, RunState};
use crate::llm::{ChatModel, RecordedLlm};
use crate::protocol::{Message, Session};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub run_id: String,
    pub sessions: usize,
    pub messages: usize,
    pub machine_calls: usize,
    /// Model requests answered from the log.
    pub llm_replayed: usize,
    pub evaluations_replayed: usize,
    pub assembled_matches: bool,
    pub divergence: Option<Divergence>,
    /// The re-execution stopped for a reason other than a divergence.
    pub error: Option<String>,
}

impl ReplayReport {
    pub fn is_faithful(&self) -> bool {
        self.divergence.is_none() && self.error.is_none() && self.assembled_matches
    }
}

/// Re-execute a finished run against its recorded model replies and
/// evaluations and compare the transcripts.
pub fn replay(record: &RunRecord) -> Result<ReplayReport, StoreError> {
    replay_with_human(record, &record.sessions)
}

/// Like [`replay`], but take the human's evaluations from `evaluations`
/// instead of the record. The transcript is still compared with the record.
pub fn replay_with_human(record: &RunRecord, evaluations: &[Session]) -> Result<ReplayReport, StoreError> {
    if !record.is_complete() {
        return Err(StoreError::Incomplete(record.run_id().into()));
    }
    let mut llm = RecordedLlm::new(&record.llm_log, None);
    let mut human = RecordedHuman::new(evaluations, None);
    let result = Engine::new(&mut llm, &mut human)
        .with_run_id(record.run_id())
        .with_clock(Arc::new(LogicalClock::new()))
        .expecting(record.sessions.clone())
        .execute(&record.background, &record.manifest.config.run);

    let mut report = ReplayReport {
        run_id: record.run_id().into(),
        sessions: 0,
        messages: 0,
        machine_calls: 0,
        llm_replayed: llm.replayed(),
        evaluations_replayed: human.replayed(),
        assembled_matches: false,
        divergence: None,
        error: None,
    };
    match result {
        Ok(state) => {
            report.sessions = state.sessions.len();
            report.messages = state.sessions.iter().map(|s| s.messages.len()).sum();
            report.machine_calls = state.machine_calls();
            report.divergence = first_difference(&record.sessions, &state.sessions);
            report.assembled_matches = state.assembled == record.assembled();
        }
        Err(EngineError::Divergence(d)) => report.divergence = Some(*d),
        Err(e) => report.error = Some(e.to_string()),
    }
    Ok(report)
}

fn describe(m: Option<&Message>) -> String {
    match m {
        Some(m) => format!("{} {}", m.sender, m.tag),
        None => "end of transcript".into(),
    }
}

fn first_difference(expected: &[Session], actual: &[Session]) -> Option<Divergence> {
    for k in 0..expected.len().max(actual.len()) {
        let (e, a) = (expected.get(k), actual.get(k));
        let process = e.or(a).map(|s| s.process_id.clone()).expect("one side has session k");
        let em = e.map_or(&[][..], |s| &s.messages[..]);
        let am = a.map_or(&[][..], |s| &s.messages[..]);
        for i in 0..em.len().max(am.len()) {
            let (x, y) = (em.get(i), am.get(i));
            let same = matches!((x, y), (Some(x), Some(y)) if x.same_content(y));
            if !same {
                let at = x.or(y).expect("one side has message i");
                return Some(Divergence {
                    session: k,
                    process,
                    attempt: at.attempt,
                    index: at.index,
                    expected: describe(x),
                    actual: describe(y),
                });
            }
        }
    }
    None
}

/// Continue an interrupted run from its last checkpoint. The recorded part
/// is re-executed from the log and checked message by message; after that
/// the live agents take over and the run keeps checkpointing.
pub fn resume(
    store: &Store,
    run_id: &str,
    llm: Box<dyn ChatModel>,
    human: Box<dyn HumanAgent>,
    observer: Option<&mut dyn Observer>,
    clock: Arc<dyn Clock>,
) -> Result<RunState, StoreError> {
    let record = store.load(run_id)?;
    let mut checkpointer = Checkpointer::resume(store, &record, clock.clone())?;
    let mut llm = RecordedLlm::new(&record.llm_log, Some(llm));
    let mut human = RecordedHuman::new(&record.sessions, Some(human));
    let mut null = crate::engine::NullObserver;
    let extra: &mut dyn Observer = match observer {
        Some(o) => o,
        None => &mut null,
    };
    let mut tee = Tee(&mut checkpointer, extra);
    let state = Engine::new(&mut llm, &mut human)
        .with_run_id(run_id)
        .with_clock(clock)
        .with_observer(&mut tee)
        .expecting(record.sessions)
        .execute(&record.background, &record.manifest.config.run)?;
    Ok(state)
}

/// Start run `run_id` in `store` and execute it, checkpointing after
/// every message.
#[allow(clippy::too_many_arguments)]
pub fn run_checkpointed(
    store: &Store,
    run_id: &str,
    background: &crate::dfd::Background,
    config: &crate::engine::RunConfig,
    llm: &mut dyn ChatModel,
    human: &mut dyn HumanAgent,
    observer: Option<&mut dyn Observer>,
    clock: Arc<dyn Clock>,
) -> Result<RunState, StoreError> {
    config.validate()?;
    let stored = super::StoredConfig::new(config.clone(), &llm.info());
    let mut checkpointer = Checkpointer::create(store, run_id, background, stored, clock.clone())?;
    let mut null = crate::engine::NullObserver;
    let extra: &mut dyn Observer = match observer {
        Some(o) => o,
        None => &mut null,
    };
    let mut tee = Tee(&mut checkpointer, extra);
    let state = Engine::new(llm, human)
        .with_run_id(run_id)
        .with_clock(clock)
        .with_observer(&mut tee)
        .execute(background, config)?;
    Ok(state)
}
