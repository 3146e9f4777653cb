use serde::{Deserialize, Serialize};

use super::RunState;
use crate::dfd::VertexId;
use crate::llm::LlmLogEntry;

/// What the run is doing right now.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RunPhase {
    Validating,
    CallingModel {
        process: VertexId,
        attempt: u32,
        exchange: u32,
    },
    AwaitingHuman {
        process: VertexId,
        session: usize,
        attempt: u32,
        exchange: u32,
    },
    Summarizing,
    Done {
        outcome: String,
    },
    Aborted {
        reason: String,
    },
}

#[derive(Clone, Debug)]
pub enum Event<'a> {
    Phase(&'a RunPhase),
    /// `state.sessions[session].messages[index]` was appended.
    Message {
        session: usize,
        index: usize,
    },
    Llm(&'a LlmLogEntry),
    ProcessStarted {
        process: &'a VertexId,
    },
    ProcessFinished {
        process: &'a VertexId,
        ratified: bool,
        cache_hit: bool,
    },
    Warning(&'a str),
}

/// Sees every state change. An error aborts the run: a run that cannot be
/// checkpointed must not advance.
pub trait Observer: Send {
    fn observe(&mut self, state: &RunState, event: &Event<'_>) -> Result<(), String>;
}

pub struct NullObserver;

impl Observer for NullObserver {
    fn observe(&mut self, _: &RunState, _: &Event<'_>) -> Result<(), String> {
        Ok(())
    }
}

impl<F> Observer for F
where
    F: FnMut(&RunState, &Event<'_>) -> Result<(), String> + Send,
{
    fn observe(&mut self, state: &RunState, event: &Event<'_>) -> Result<(), String> {
        self(state, event)
    }
}
