//! Request log entries and a model that replays them.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{ChatMessage, ChatModel, ChatRequest, LlmError, ModelInfo, Purpose};
use crate::clock::Timestamp;

pub const LLM_LOG_VERSION: u32 = 1;

/// One line of a run's `llm.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmLogEntry {
    pub v: u32,
    pub request_hash: String,
    pub purpose: Purpose,
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
    pub completion: Option<String>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
    pub ts: Timestamp,
}

impl LlmLogEntry {
    pub fn new(request: &ChatRequest, info: &ModelInfo, result: Result<&str, &LlmError>, ts: Timestamp) -> Self {
        let (completion, error, error_kind) = match result {
            Ok(c) => (Some(c.to_string()), None, None),
            Err(e) => (None, Some(e.to_string()), Some(e.kind().to_string())),
        };
        LlmLogEntry {
            v: LLM_LOG_VERSION,
            request_hash: request.hash(),
            purpose: request.purpose.clone(),
            model: info.model.clone(),
            temperature: info.temperature,
            messages: request.messages.clone(),
            completion,
            error,
            error_kind,
            ts,
        }
    }
}

type Answer = Result<String, (String, String)>;

/// Answers requests seen in a log with their recorded completion or
/// failure, in order per request hash. Requests not in the log go to the
/// fallback.
pub struct RecordedLlm {
    answers: HashMap<String, VecDeque<Answer>>,
    info: ModelInfo,
    fallback: Option<Box<dyn ChatModel>>,
    replayed: usize,
}

impl RecordedLlm {
    pub fn new(entries: &[LlmLogEntry], fallback: Option<Box<dyn ChatModel>>) -> Self {
        let mut answers: HashMap<String, VecDeque<Answer>> = HashMap::new();
        for e in entries {
            let answer = match (&e.completion, &e.error) {
                (Some(c), _) => Ok(c.clone()),
                (None, Some(err)) => Err((e.error_kind.clone().unwrap_or_default(), err.clone())),
                (None, None) => continue,
            };
            answers.entry(e.request_hash.clone()).or_default().push_back(answer);
        }
        let info = match (&fallback, entries.first()) {
            (Some(f), _) => f.info(),
            (None, Some(e)) => ModelInfo {
                model: e.model.clone(),
                temperature: e.temperature,
            },
            (None, None) => ModelInfo {
                model: "recorded".into(),
                temperature: 1.0,
            },
        };
        Self {
            answers,
            info,
            fallback,
            replayed: 0,
        }
    }

    /// How many requests were answered from the log.
    pub fn replayed(&self) -> usize {
        self.replayed
    }
}

impl ChatModel for RecordedLlm {
    fn info(&self) -> ModelInfo {
        self.info.clone()
    }

    fn complete(&mut self, request: &ChatRequest) -> Result<String, LlmError> {
        let hash = request.hash();
        if let Some(answer) = self.answers.get_mut(&hash).and_then(VecDeque::pop_front) {
            self.replayed += 1;
            if let Some(f) = &mut self.fallback {
                f.skip(request);
            }
            return answer.map_err(|(kind, message)| LlmError::recorded(&kind, &message));
        }
        match &mut self.fallback {
            Some(f) => f.complete(request),
            None => Err(LlmError::NoFixture(format!("request {hash} is not in the log"))),
        }
    }
}
