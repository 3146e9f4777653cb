//! Replays the evaluations found in recorded sessions.

use std::collections::HashMap;

use super::{AgentError, EvalRequest, Evaluation, HumanAgent};
use crate::protocol::{Judgment, Sender, Session, Tag};

type Key = (String, u32, u32);

/// Answers with the human message recorded at the same
/// (process, attempt, exchange); anything else goes to the fallback.
pub struct RecordedHuman {
    answers: HashMap<Key, Evaluation>,
    fallback: Option<Box<dyn HumanAgent>>,
    replayed: usize,
    last_was_live: bool,
}

impl RecordedHuman {
    pub fn new<'a>(sessions: impl IntoIterator<Item = &'a Session>, fallback: Option<Box<dyn HumanAgent>>) -> Self {
        let mut answers = HashMap::new();
        for s in sessions {
            for m in &s.messages {
                if m.sender != Sender::Human || m.tag == Tag::Init || m.synthetic {
                    continue;
                }
                let judgment = m.judgment.unwrap_or(match m.tag {
                    Tag::Ratify => Judgment::new(true, true),
                    Tag::Refute => Judgment::new(false, true),
                    _ => Judgment::new(false, false),
                });
                let refutation = m.explanation.clone().filter(|t| !t.is_empty());
                answers.insert(
                    (s.process_id.to_string(), m.attempt, m.exchange()),
                    Evaluation {
                        tag: m.tag,
                        refutation,
                        judgment,
                    },
                );
            }
        }
        Self {
            answers,
            fallback,
            replayed: 0,
            last_was_live: false,
        }
    }

    pub fn replayed(&self) -> usize {
        self.replayed
    }
}

impl HumanAgent for RecordedHuman {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<Evaluation, AgentError> {
        let key = (
            request.session.process_id.to_string(),
            request.attempt,
            request.exchange,
        );
        if let Some(e) = self.answers.remove(&key) {
            self.replayed += 1;
            self.last_was_live = false;
            return Ok(e);
        }
        self.last_was_live = true;
        match &mut self.fallback {
            Some(f) => f.evaluate(request),
            None => Err(AgentError::Policy(format!(
                "no recorded evaluation for {} attempt {} exchange {}",
                key.0, key.1, key.2
            ))),
        }
    }

    fn committed(&mut self) {
        if self.last_was_live {
            if let Some(f) = &mut self.fallback {
                f.committed();
            }
        }
    }

    fn runs_code(&self) -> bool {
        self.fallback.as_ref().is_some_and(|f| f.runs_code())
    }
}
