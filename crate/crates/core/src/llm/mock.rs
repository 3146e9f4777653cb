//! Deterministic model driven by a fixture file.
//!
//! ```json
//! {"v": 1,
//!  "processes": {"P1": ["first answer", "second answer"]},
//!  "baseline": ["..."],
//!  "summary": "...",
//!  "by_hash": {"<request sha256>": ["answer"]}}
//! ```
//!
//! Lookup order: `by_hash` (queued, the last entry repeats), then the
//! per-process list indexed by the session's call number, then a generated
//! answer naming the process and call so every proposal differs.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatModel, ChatRequest, LlmError, ModelInfo, Purpose};

pub const FIXTURE_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmFixture {
    pub v: u32,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub processes: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub baseline: Vec<String>,
    #[serde(default)]
    pub summary: Option<String>,
    #[serde(default)]
    pub by_hash: BTreeMap<String, Vec<String>>,
}

impl LlmFixture {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let fixture: LlmFixture =
            serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        if fixture.v != FIXTURE_VERSION {
            return Err(LlmError::Config(format!(
                "{}: unsupported fixture version {}",
                path.display(),
                fixture.v
            )));
        }
        Ok(fixture)
    }
}

#[derive(Clone, Debug)]
pub struct ScriptedLlm {
    fixture: LlmFixture,
    by_hash: HashMap<String, VecDeque<String>>,
    queue: VecDeque<String>,
    repeat: Option<String>,
    strict: bool,
    calls: usize,
}

impl ScriptedLlm {
    pub fn new(fixture: LlmFixture) -> Self {
        let by_hash = fixture
            .by_hash
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
            .collect();
        Self {
            fixture,
            by_hash,
            queue: VecDeque::new(),
            repeat: None,
            strict: false,
            calls: 0,
        }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        LlmFixture::load(path).map(Self::new)
    }

    /// Answers every program or baseline request from `answers` in order,
    /// whichever process asks, then falls back to generated answers.
    pub fn sequence<S: Into<String>>(answers: impl IntoIterator<Item = S>) -> Self {
        let mut llm = Self::new(LlmFixture::default());
        llm.queue = answers.into_iter().map(Into::into).collect();
        llm
    }

    /// Gives the same answer to everything.
    pub fn repeating(answer: impl Into<String>) -> Self {
        let mut llm = Self::new(LlmFixture::default());
        llm.repeat = Some(answer.into());
        llm
    }

    /// Fail with [`LlmError::NoFixture`] instead of generating an answer.
    pub fn strict(mut self) -> Self {
        self.strict = true;
        self
    }

    /// Requests answered so far.
    pub fn calls(&self) -> usize {
        self.calls
    }

    fn generated(&self, request: &ChatRequest) -> Result<String, LlmError> {
        if self.strict {
            return Err(LlmError::NoFixture(format!(
                "{:?} (request {})",
                request.purpose,
                request.hash()
            )));
        }
        Ok(match &request.purpose {
            Purpose::Program { process, call, .. } => format!(
                "Proposal {call} for {process}.\n\n```python\n# {process}, proposal {call}\nprint(\"{process} step {call}\")\n```\n"
            ),
            Purpose::Baseline { call } => format!(
                "Whole-task attempt {call}.\n\n```python\n# attempt {call}\nprint(\"attempt {call}\")\n```\n"
            ),
            Purpose::Summary => {
                let chars: usize = request.messages.iter().map(|m| m.content.len()).sum();
                format!("Summary of earlier conversation ({chars} characters condensed).")
            }
        })
    }
}

impl ChatModel for ScriptedLlm {
    fn info(&self) -> ModelInfo {
        ModelInfo {
            model: self.fixture.model.clone().unwrap_or_else(|| "mock".into()),
            temperature: 1.0,
        }
    }

    fn complete(&mut self, request: &ChatRequest) -> Result<String, LlmError> {
        self.calls += 1;
        if let Some(answer) = &self.repeat {
            return Ok(answer.clone());
        }
        let keyed = if self.by_hash.is_empty() {
            None
        } else {
            self.by_hash.get_mut(&request.hash())
        };
        if let Some(q) = keyed {
            if q.len() > 1 {
                return Ok(q.pop_front().expect("non-empty"));
            }
            if let Some(last) = q.front() {
                return Ok(last.clone());
            }
        }
        let scripted = match &request.purpose {
            Purpose::Summary => self.fixture.summary.clone(),
            _ if !self.queue.is_empty() => self.queue.pop_front(),
            Purpose::Program { process, call, .. } => self
                .fixture
                .processes
                .get(process.as_str())
                .and_then(|list| list.get(*call as usize - 1))
                .cloned(),
            Purpose::Baseline { call } => self.fixture.baseline.get(*call as usize - 1).cloned(),
        };
        match scripted {
            Some(answer) => Ok(answer),
            None => self.generated(request),
        }
    }

    fn skip(&mut self, request: &ChatRequest) {
        let _ = self.complete(request);
    }
}
