//! Human-side evaluators: given the machine's latest program, decide
//! RATIFY, REFUTE (with a refutation) or REJECT.
//!
//! Every evaluation passes [`check_evaluation`] before the engine records it;
//! an agent that answers with an illegal tag is a protocol error.

mod checker;
mod console;
mod recorded;
mod remote;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dfd::ProcessSpec;
use crate::protocol::{human_tag_options, Judgment, Limits, ProgramText, Session, Tag};

pub use checker::{CheckOutcome, CheckerHook};
pub use console::ConsoleHuman;
pub use recorded::RecordedHuman;
pub use remote::{token_for, AwaitingEvaluation, EvalSlot, RemoteHuman, SubmitError};
pub use scripted::{CheckerRule, HumanPolicy, Policy, ScriptedHuman, Step, StepAction, Then, POLICY_VERSION};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub tag: Tag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refutation: Option<String>,
    #[serde(flatten)]
    pub judgment: Judgment,
}

impl Evaluation {
    pub fn ratify() -> Self {
        Self {
            tag: Tag::Ratify,
            refutation: None,
            judgment: Judgment::new(true, true),
        }
    }

    /// The program is wrong.
    pub fn refute(text: impl Into<String>) -> Self {
        Self {
            tag: Tag::Refute,
            refutation: Some(text.into()),
            judgment: Judgment::new(false, true),
        }
    }

    /// The program is fine but the explanation is not.
    pub fn refute_explanation(text: impl Into<String>) -> Self {
        Self {
            tag: Tag::Refute,
            refutation: Some(text.into()),
            judgment: Judgment::new(true, false),
        }
    }

    pub fn reject(note: Option<String>) -> Self {
        Self {
            tag: Tag::Reject,
            refutation: note,
            judgment: Judgment::new(false, false),
        }
    }
}

/// What an agent sees when asked to evaluate.
#[derive(Clone, Copy, Debug)]
pub struct EvalRequest<'a> {
    /// The session so far, ending with the machine message under review.
    pub session: &'a Session,
    pub spec: Option<&'a ProcessSpec>,
    pub program: &'a ProgramText,
    pub explanation: &'a str,
    pub attempt: u32,
    pub exchange: u32,
    pub limits: Limits,
    /// Free-form baseline turn: the tag tables do not apply.
    pub free_form: bool,
}

impl EvalRequest<'_> {
    /// Human evaluations already given in this session.
    pub fn prior_evaluations(&self) -> usize {
        self.session.human_interactions()
    }

    pub fn legal_tags(&self) -> Vec<Tag> {
        if self.free_form {
            return vec![Tag::Ratify, Tag::Refute, Tag::Reject];
        }
        let m = self.limits.reject_after;
        let mut tags: Vec<Tag> = [(true, true), (false, true), (false, false)]
            .into_iter()
            .flat_map(|(a, b)| human_tag_options(a, b, self.exchange, m))
            .collect();
        tags.sort();
        tags.dedup();
        tags
    }

    pub fn reject_allowed(&self) -> bool {
        self.legal_tags().contains(&Tag::Reject)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgentError {
    #[error("REJECT gated until message {m} (exchange {exchange})")]
    RejectGated { exchange: u32, m: u32 },
    #[error("{tag} is not a legal human tag for match={matches}, agree={agrees} at exchange {exchange}")]
    IllegalTag {
        tag: Tag,
        matches: bool,
        agrees: bool,
        exchange: u32,
    },
    #[error("REFUTE needs a non-empty refutation")]
    EmptyRefutation,
    #[error("operator disconnected")]
    Disconnected,
    #[error("evaluation cancelled")]
    Cancelled,
    #[error("policy error: {0}")]
    Policy(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Central legality check for every evaluation, whatever produced it.
pub fn check_evaluation(eval: &Evaluation, exchange: u32, limits: Limits, free_form: bool) -> Result<(), AgentError> {
    if eval.tag == Tag::Refute && eval.refutation.as_deref().is_none_or(|t| t.trim().is_empty()) {
        return Err(AgentError::EmptyRefutation);
    }
    if free_form {
        return match eval.tag {
            Tag::Ratify | Tag::Refute | Tag::Reject => Ok(()),
            tag => Err(AgentError::IllegalTag {
                tag,
                matches: eval.judgment.matches,
                agrees: eval.judgment.agrees,
                exchange,
            }),
        };
    }
    let m = limits.reject_after;
    if eval.tag == Tag::Reject && exchange <= m {
        return Err(AgentError::RejectGated { exchange, m });
    }
    let allowed = human_tag_options(eval.judgment.matches, eval.judgment.agrees, exchange, m);
    if allowed.contains(&eval.tag) {
        Ok(())
    } else {
        Err(AgentError::IllegalTag {
            tag: eval.tag,
            matches: eval.judgment.matches,
            agrees: eval.judgment.agrees,
            exchange,
        })
    }
}

pub trait HumanAgent: Send {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<Evaluation, AgentError>;

    /// Called once the engine has durably recorded the last evaluation.
    fn committed(&mut self) {}

    /// Whether this agent executes generated code.
    fn runs_code(&self) -> bool {
        false
    }
}

impl<T: HumanAgent + ?Sized> HumanAgent for Box<T> {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<Evaluation, AgentError> {
        (**self).evaluate(request)
    }

    fn committed(&mut self) {
        (**self).committed()
    }

    fn runs_code(&self) -> bool {
        (**self).runs_code()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backfilled_judgments_are_table_consistent() {
        let limits = Limits::default();
        for e in [
            Evaluation::ratify(),
            Evaluation::refute("wrong"),
            Evaluation::refute_explanation("unclear"),
        ] {
            assert_eq!(check_evaluation(&e, 1, limits, false), Ok(()));
        }
        assert_eq!(check_evaluation(&Evaluation::reject(None), 7, limits, false), Ok(()));
    }

    #[test]
    fn reject_is_gated() {
        let err = check_evaluation(&Evaluation::reject(None), 6, Limits::default(), false).unwrap_err();
        assert_eq!(err, AgentError::RejectGated { exchange: 6, m: 6 });
        assert!(err.to_string().starts_with("REJECT gated until message 6"));
    }

    #[test]
    fn refute_needs_text_and_revise_is_never_legal() {
        let limits = Limits::default();
        assert_eq!(
            check_evaluation(&Evaluation::refute("  "), 1, limits, false),
            Err(AgentError::EmptyRefutation)
        );
        let revise = Evaluation {
            tag: Tag::Revise,
            refutation: None,
            judgment: Judgment::new(false, true),
        };
        assert!(check_evaluation(&revise, 1, limits, false).is_err());
        assert!(check_evaluation(&revise, 1, limits, true).is_err());
    }

    #[test]
    fn ratify_with_a_negative_judgment_is_illegal() {
        let e = Evaluation {
            tag: Tag::Ratify,
            refutation: None,
            judgment: Judgment::new(false, true),
        };
        assert!(matches!(
            check_evaluation(&e, 2, Limits::default(), false),
            Err(AgentError::IllegalTag { .. })
        ));
    }
}
