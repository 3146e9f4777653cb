//! Evaluations delivered from outside the engine thread (the HTTP service).
//!
//! The engine opens the [`EvalSlot`] with a token naming the awaited
//! exchange and blocks. The first legal submission for that token wins; its
//! submitter is acknowledged only after the engine has recorded the
//! evaluation, so an acknowledged answer survives a crash.

use std::collections::HashSet;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{check_evaluation, AgentError, EvalRequest, Evaluation, HumanAgent};
use crate::dfd::VertexId;
use crate::protocol::{Limits, Tag};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwaitingEvaluation {
    pub token: String,
    pub process: VertexId,
    pub attempt: u32,
    pub exchange: u32,
    pub m: u32,
    pub legal_tags: Vec<Tag>,
    pub program: Option<String>,
    pub explanation: String,
    pub free_form: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubmitError {
    #[error("already decided")]
    AlreadyDecided,
    #[error("no evaluation is awaited under token {0}")]
    UnknownToken(String),
    #[error("{0}")]
    Illegal(AgentError),
    #[error("run cancelled")]
    Cancelled,
    #[error("evaluation accepted but not yet recorded")]
    NotRecorded,
}

#[derive(Default)]
struct SlotState {
    awaiting: Option<AwaitingEvaluation>,
    limits: Option<Limits>,
    answer: Option<Evaluation>,
    committed: HashSet<String>,
    cancelled: Option<String>,
}

pub struct EvalSlot {
    state: Mutex<SlotState>,
    cv: Condvar,
    commit_timeout: Duration,
}

impl EvalSlot {
    pub fn new() -> Arc<Self> {
        Self::with_commit_timeout(Duration::from_secs(30))
    }

    pub fn with_commit_timeout(commit_timeout: Duration) -> Arc<Self> {
        Arc::new(Self {
            state: Mutex::new(SlotState::default()),
            cv: Condvar::new(),
            commit_timeout,
        })
    }

    fn lock(&self) -> MutexGuard<'_, SlotState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn awaiting(&self) -> Option<AwaitingEvaluation> {
        let s = self.lock();
        s.awaiting.clone().filter(|_| s.answer.is_none())
    }

    /// Offer an evaluation. Blocks until the engine has recorded it.
    pub fn submit(&self, token: &str, eval: Evaluation) -> Result<(), SubmitError> {
        let mut s = self.lock();
        if s.cancelled.is_some() {
            return Err(SubmitError::Cancelled);
        }
        if s.committed.contains(token) {
            return Err(SubmitError::AlreadyDecided);
        }
        let Some(awaiting) = s.awaiting.as_ref().filter(|a| a.token == token) else {
            return Err(SubmitError::UnknownToken(token.to_string()));
        };
        if s.answer.is_some() {
            return Err(SubmitError::AlreadyDecided);
        }
        let limits = s.limits.unwrap_or_default();
        check_evaluation(&eval, awaiting.exchange, limits, awaiting.free_form).map_err(SubmitError::Illegal)?;
        s.answer = Some(eval);
        self.cv.notify_all();
        let deadline = Instant::now() + self.commit_timeout;
        loop {
            if s.committed.contains(token) {
                return Ok(());
            }
            if s.cancelled.is_some() {
                return Err(SubmitError::Cancelled);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(SubmitError::NotRecorded);
            }
            s = self
                .cv
                .wait_timeout(s, deadline - now)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }

    pub fn cancel(&self, reason: impl Into<String>) {
        let mut s = self.lock();
        s.cancelled.get_or_insert_with(|| reason.into());
        self.cv.notify_all();
    }

    pub fn is_cancelled(&self) -> bool {
        self.lock().cancelled.is_some()
    }

    fn open(&self, awaiting: AwaitingEvaluation, limits: Limits) {
        let mut s = self.lock();
        s.awaiting = Some(awaiting);
        s.limits = Some(limits);
        s.answer = None;
        self.cv.notify_all();
    }

    fn wait(&self) -> Result<Evaluation, AgentError> {
        let mut s = self.lock();
        loop {
            if s.cancelled.is_some() {
                s.awaiting = None;
                return Err(AgentError::Cancelled);
            }
            if let Some(answer) = s.answer.clone() {
                return Ok(answer);
            }
            s = self.cv.wait(s).unwrap_or_else(|p| p.into_inner());
        }
    }

    fn commit(&self) {
        let mut s = self.lock();
        if let Some(a) = s.awaiting.take() {
            if s.answer.take().is_some() {
                s.committed.insert(a.token);
            }
        }
        self.cv.notify_all();
    }
}

/// Token naming one awaited evaluation; stable across restarts.
pub fn token_for(run_id: &str, process: &VertexId, attempt: u32, exchange: u32) -> String {
    format!("{run_id}.{process}.{attempt}.{exchange}")
}

pub struct RemoteHuman {
    slot: Arc<EvalSlot>,
    run_id: String,
}

impl RemoteHuman {
    pub fn new(slot: Arc<EvalSlot>, run_id: impl Into<String>) -> Self {
        Self {
            slot,
            run_id: run_id.into(),
        }
    }
}

impl HumanAgent for RemoteHuman {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<Evaluation, AgentError> {
        let process = request.session.process_id.clone();
        let awaiting = AwaitingEvaluation {
            token: token_for(&self.run_id, &process, request.attempt, request.exchange),
            process,
            attempt: request.attempt,
            exchange: request.exchange,
            m: request.limits.reject_after,
            legal_tags: request.legal_tags(),
            program: request.program.as_str().map(str::to_string),
            explanation: request.explanation.to_string(),
            free_form: request.free_form,
        };
        self.slot.open(awaiting, request.limits);
        self.slot.wait()
    }

    fn committed(&mut self) {
        self.slot.commit();
    }
}
