//! In-flight runs: the evaluation slot, the event fan-out and the latest
//! phase. Nothing here is needed to reconstruct a run; the store has it.

use std::sync::{Arc, Mutex};

use serde::Serialize;
use tokio::sync::{broadcast, watch};

use crate::agent::EvalSlot;
use crate::dfd::VertexId;
use crate::engine::{Event, Observer, RunPhase, RunState, RunStatus};
use crate::protocol::TranscriptLine;

pub const EVENT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Phase {
        phase: RunPhase,
        #[serde(flatten)]
        status: RunStatus,
    },
    Message {
        session: usize,
        line: TranscriptLine,
        /// Program text for machine messages, so viewers need not fetch it.
        #[serde(skip_serializing_if = "Option::is_none")]
        program_text: Option<String>,
    },
    /// A piece of a streamed machine reply.
    Delta {
        text: String,
    },
    Process {
        process: VertexId,
        ratified: bool,
        cache_hit: bool,
    },
    Warning {
        text: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Phase { .. } => "phase",
            EventKind::Message { .. } => "message",
            EventKind::Delta { .. } => "delta",
            EventKind::Process { .. } => "process",
            EventKind::Warning { .. } => "warning",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ServerEvent {
    pub v: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

pub struct LiveRun {
    pub run_id: String,
    pub slot: Arc<EvalSlot>,
    events: broadcast::Sender<ServerEvent>,
    seq: watch::Sender<u64>,
    view: Mutex<(RunPhase, RunStatus)>,
}

impl LiveRun {
    pub fn new(run_id: &str, slot: Arc<EvalSlot>) -> Arc<Self> {
        let (events, _) = broadcast::channel(1024);
        let (seq, _) = watch::channel(0);
        Arc::new(Self {
            run_id: run_id.into(),
            slot,
            events,
            seq,
            view: Mutex::new((RunPhase::Validating, RunStatus::Running)),
        })
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServerEvent> {
        self.events.subscribe()
    }

    pub fn watch_seq(&self) -> watch::Receiver<u64> {
        self.seq.subscribe()
    }

    pub fn seq(&self) -> u64 {
        *self.seq.borrow()
    }

    pub fn view(&self) -> (RunPhase, RunStatus) {
        self.view.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn is_running(&self) -> bool {
        self.view().1 == RunStatus::Running
    }

    pub fn set_status(&self, phase: RunPhase, status: RunStatus) {
        *self.view.lock().unwrap_or_else(|p| p.into_inner()) = (phase.clone(), status.clone());
        self.publish(EventKind::Phase { phase, status });
    }

    pub fn publish(&self, kind: EventKind) {
        let mut seq = 0;
        self.seq.send_modify(|s| {
            *s += 1;
            seq = *s;
        });
        // No subscribers is fine.
        let _ = self.events.send(ServerEvent {
            v: EVENT_VERSION,
            seq,
            kind,
        });
    }
}

/// Observer that feeds a [`LiveRun`].
pub struct Broadcaster(pub Arc<LiveRun>);

impl Observer for Broadcaster {
    fn observe(&mut self, state: &RunState, event: &Event<'_>) -> Result<(), String> {
        let live = &self.0;
        match event {
            Event::Phase(p) => {
                *live.view.lock().unwrap_or_else(|p| p.into_inner()) = ((*p).clone(), state.status.clone());
                live.publish(EventKind::Phase {
                    phase: (*p).clone(),
                    status: state.status.clone(),
                });
            }
            Event::Message { session, index } => {
                let s = &state.sessions[*session];
                let m = &s.messages[*index];
                live.publish(EventKind::Message {
                    session: *session,
                    line: TranscriptLine::from_message(&s.process_id, m),
                    program_text: m.program.as_ref().and_then(|p| p.as_str()).map(str::to_string),
                });
            }
            Event::ProcessFinished {
                process,
                ratified,
                cache_hit,
            } => live.publish(EventKind::Process {
                process: (*process).clone(),
                ratified: *ratified,
                cache_hit: *cache_hit,
            }),
            Event::Warning(w) => live.publish(EventKind::Warning { text: w.to_string() }),
            Event::Llm(_) | Event::ProcessStarted { .. } => {}
        }
        Ok(())
    }
}
