//! The synthesis loop: one tagged session per process, threaded context,
//! ratified-program caching and final assembly, plus the two unstructured
//! baselines.
//!
//! A run is a deterministic function of its agents. Resuming a checkpoint
//! or replaying a finished run re-executes it with recorded agents while
//! checking each message against the recorded transcript.

mod baseline;
mod interact;
mod observer;
mod run;
mod summarize;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, HumanAgent};
use crate::clock::{Clock, SystemClock};
use crate::context::{CharsPerToken, Context, TokenEstimator};
use crate::dfd::{DfdError, ValidationReport, VertexId};
use crate::llm::ChatModel;
use crate::protocol::{Limits, ProgramText, Session};

pub use baseline::baseline_process;
pub use interact::NO_PROGRAM;
pub use observer::{Event, NullObserver, Observer, RunPhase};
pub use run::{assemble, process_header};
pub use summarize::{summarize_context, Summarized};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Structured,
    LlmK { budget: u32 },
    Llm0,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Structured => "structured",
            Mode::LlmK { .. } => "llm-k",
            Mode::Llm0 => "llm-0",
        }
    }
}

/// Missing fields take their defaults when deserialized.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub limits: Limits,
    pub mode: Mode,
    /// Keep the rendered context under this many estimated tokens.
    pub context_budget: Option<usize>,
    /// Drop refuted proposals and failed retries from the context handed to
    /// the next process.
    pub clean_context: bool,
    pub caching: bool,
    pub ordering: Option<Vec<VertexId>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            limits: Limits::default(),
            mode: Mode::Structured,
            context_budget: None,
            clean_context: false,
            caching: true,
            ordering: None,
        }
    }
}

impl RunConfig {
    pub fn with_limits(retries: u32, messages: u32, reject_after: u32) -> Self {
        Self {
            limits: Limits {
                retries,
                messages,
                reject_after,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let Limits {
            retries: r,
            messages: n,
            reject_after: m,
        } = self.limits;
        if r < 1 {
            return Err(EngineError::InvalidConfig(format!("R must be at least 1, got {r}")));
        }
        if m < 1 || m > n {
            return Err(EngineError::InvalidConfig(format!(
                "need 1 <= m <= n, got m = {m}, n = {n}"
            )));
        }
        if let Mode::LlmK { budget: 0 } = self.mode {
            return Err(EngineError::InvalidConfig("llm-k budget must be positive".into()));
        }
        if self.context_budget == Some(0) {
            return Err(EngineError::InvalidConfig("context budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    /// Every process ratified and the program assembled.
    Done,
    /// A process ended without a ratified program.
    Failed,
    Aborted(String),
}

/// Where a message first differed from the recorded transcript.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    /// Session number within the run.
    pub session: usize,
    pub process: VertexId,
    pub attempt: u32,
    pub index: u32,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid background:\n{0}")]
    InvalidBackground(ValidationReport),
    #[error(transparent)]
    Dfd(#[from] DfdError),
    #[error("process {process}: illegal evaluation: {error}")]
    Protocol {
        process: VertexId,
        error: AgentError,
        /// The session up to the offending evaluation.
        session: Box<Session>,
    },
    #[error("process {process}: {error}")]
    Agent { process: VertexId, error: AgentError },
    #[error("cannot assemble: {0}")]
    Assembly(String),
    #[error("checkpoint failed: {0}")]
    Checkpoint(String),
    #[error(
        "transcript diverges in session {} ({}) at attempt {} index {}: expected {}, got {}",
        .0.session, .0.process, .0.attempt, .0.index, .0.expected, .0.actual
    )]
    Divergence(Box<Divergence>),
}

impl EngineError {
    pub fn process(&self) -> Option<&VertexId> {
        match self {
            EngineError::Protocol { process, .. } | EngineError::Agent { process, .. } => Some(process),
            EngineError::Divergence(d) => Some(&d.process),
            _ => None,
        }
    }
}

/// Everything a run has produced so far.
#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub run_id: String,
    pub mode: Mode,
    pub ordering: Vec<VertexId>,
    /// Sessions in the order they were opened; cache hits open none.
    pub sessions: Vec<Session>,
    /// Ratified program per process.
    pub programs: BTreeMap<VertexId, ProgramText>,
    pub cache_hits: Vec<VertexId>,
    /// Spec hash to ratified program.
    pub cache: BTreeMap<String, ProgramText>,
    pub context: Context,
    /// `None` while running; `Some(Empty)` once the run failed.
    pub assembled: Option<ProgramText>,
    pub status: RunStatus,
    pub warnings: Vec<String>,
}

impl RunState {
    pub fn new(run_id: impl Into<String>, mode: Mode, ordering: Vec<VertexId>, context: Context) -> Self {
        Self {
            run_id: run_id.into(),
            mode,
            ordering,
            sessions: Vec::new(),
            programs: BTreeMap::new(),
            cache_hits: Vec::new(),
            cache: BTreeMap::new(),
            context,
            assembled: None,
            status: RunStatus::Running,
            warnings: Vec::new(),
        }
    }

    pub fn machine_calls(&self) -> usize {
        self.sessions.iter().map(Session::machine_messages).sum()
    }

    /// Human-authored messages other than INIT and TERM, over all sessions.
    pub fn interactions(&self) -> usize {
        self.sessions.iter().map(Session::human_interactions).sum()
    }

    pub fn session_for(&self, process: &VertexId) -> Option<(usize, &Session)> {
        self.sessions
            .iter()
            .enumerate()
            .rev()
            .find(|(_, s)| &s.process_id == process)
    }

    pub fn assembled_program(&self) -> ProgramText {
        self.assembled.clone().unwrap_or(ProgramText::Empty)
    }
}

/// Drives the loop against one model and one human agent.
pub struct Engine<'a> {
    llm: &'a mut dyn ChatModel,
    human: &'a mut dyn HumanAgent,
    clock: Arc<dyn Clock>,
    estimator: Arc<dyn TokenEstimator>,
    observer: Option<&'a mut dyn Observer>,
    expected: Vec<Session>,
    run_id: String,
}

impl<'a> Engine<'a> {
    pub fn new(llm: &'a mut dyn ChatModel, human: &'a mut dyn HumanAgent) -> Self {
        Self {
            llm,
            human,
            clock: Arc::new(SystemClock),
            estimator: Arc::new(CharsPerToken::default()),
            observer: None,
            expected: Vec::new(),
            run_id: uuid::Uuid::new_v4().to_string(),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_estimator(mut self, estimator: Arc<dyn TokenEstimator>) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_observer(mut self, observer: &'a mut dyn Observer) -> Self {
        self.observer = Some(observer);
        self
    }

    pub fn with_run_id(mut self, run_id: impl Into<String>) -> Self {
        self.run_id = run_id.into();
        self
    }

    /// Check every message against these sessions, reusing their
    /// timestamps, until they run out.
    pub fn expecting(mut self, sessions: Vec<Session>) -> Self {
        self.expected = sessions;
        self
    }

    /// [`Engine::run`] or [`Engine::run_baseline`], whichever the mode asks for.
    pub fn execute(
        &mut self,
        background: &crate::dfd::Background,
        config: &RunConfig,
    ) -> Result<RunState, EngineError> {
        match config.mode {
            Mode::Structured => self.run(background, config),
            _ => self.run_baseline(background, config),
        }
    }
}
