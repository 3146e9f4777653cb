//! Deterministic evaluators driven by a policy file.
//!
//! ```json
//! {"v": 1,
//!  "default": [{"action": "ratify"}],
//!  "processes": {
//!    "P1": [{"action": "refute", "text": "wrong column"}, {"action": "ratify"}],
//!    "P2": {"checker": "python3 {file}", "max_failures": 3, "then": "reject"}},
//!  "baseline": [{"action": "refute", "text": "still wrong"}]}
//! ```
//!
//! A step list is indexed by how many evaluations the session already holds;
//! past its end the last step repeats. A checker rule runs the command on
//! every proposal: pass ratifies, failure refutes with the output, and once
//! `max_failures` consecutive failures have accumulated past the REJECT gate
//! the rule rejects (or keeps refuting with `"then": "exhaust"`).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{AgentError, CheckOutcome, CheckerHook, EvalRequest, Evaluation, HumanAgent};
use crate::protocol::{Sender, Tag};

pub const POLICY_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Ratify,
    Refute,
    /// REFUTE aimed at the explanation only.
    RefuteExplanation,
    Reject,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub action: StepAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl Step {
    pub fn ratify() -> Self {
        Step {
            action: StepAction::Ratify,
            text: None,
        }
    }

    pub fn refute(text: impl Into<String>) -> Self {
        Step {
            action: StepAction::Refute,
            text: Some(text.into()),
        }
    }

    pub fn reject() -> Self {
        Step {
            action: StepAction::Reject,
            text: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Then {
    Reject,
    Exhaust,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerRule {
    pub checker: String,
    pub max_failures: u32,
    pub then: Then,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    60
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Policy {
    Steps(Vec<Step>),
    Checker(CheckerRule),
}

impl Policy {
    pub fn always_ratify() -> Self {
        Policy::Steps(vec![Step::ratify()])
    }

    pub fn always_refute() -> Self {
        Policy::Steps(vec![Step::refute("not yet")])
    }

    /// Refute `k` times, then ratify.
    pub fn ratify_after(k: usize) -> Self {
        let mut steps: Vec<Step> = (1..=k).map(|i| Step::refute(format!("refutation {i}"))).collect();
        steps.push(Step::ratify());
        Policy::Steps(steps)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanPolicy {
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Policy>,
    #[serde(default)]
    pub processes: BTreeMap<String, Policy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Policy>,
}

impl HumanPolicy {
    pub fn uniform(policy: Policy) -> Self {
        HumanPolicy {
            v: POLICY_VERSION,
            default: Some(policy.clone()),
            processes: BTreeMap::new(),
            baseline: Some(policy),
        }
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Policy(format!("{}: {e}", path.display())))?;
        let policy: HumanPolicy =
            serde_json::from_str(&text).map_err(|e| AgentError::Policy(format!("{}: {e}", path.display())))?;
        if policy.v != POLICY_VERSION {
            return Err(AgentError::Policy(format!(
                "{}: unsupported policy version {}",
                path.display(),
                policy.v
            )));
        }
        Ok(policy)
    }

    pub fn runs_code(&self) -> bool {
        self.default
            .iter()
            .chain(self.processes.values())
            .chain(self.baseline.iter())
            .any(|p| matches!(p, Policy::Checker(_)))
    }
}

#[derive(Clone, Debug)]
pub struct ScriptedHuman {
    policy: HumanPolicy,
}

impl ScriptedHuman {
    pub fn new(policy: HumanPolicy) -> Self {
        Self { policy }
    }

    pub fn uniform(policy: Policy) -> Self {
        Self::new(HumanPolicy::uniform(policy))
    }

    fn policy_for(&self, request: &EvalRequest<'_>) -> Result<&Policy, AgentError> {
        let specific = if request.free_form {
            self.policy.baseline.as_ref()
        } else {
            self.policy.processes.get(request.session.process_id.as_str())
        };
        specific
            .or(self.policy.default.as_ref())
            .ok_or_else(|| AgentError::Policy(format!("no policy for {}", request.session.process_id)))
    }
}

fn from_step(step: &Step) -> Evaluation {
    let text = step.text.clone().unwrap_or_else(|| "refuted".into());
    match step.action {
        StepAction::Ratify => Evaluation::ratify(),
        StepAction::Refute => Evaluation::refute(text),
        StepAction::RefuteExplanation => Evaluation::refute_explanation(text),
        StepAction::Reject => Evaluation::reject(step.text.clone()),
    }
}

/// Human refutations at the end of the session, not counting engine-made ones.
fn trailing_failures(request: &EvalRequest<'_>) -> u32 {
    request
        .session
        .messages
        .iter()
        .rev()
        .filter(|m| m.sender == Sender::Human && m.tag != Tag::Init && !m.synthetic)
        .take_while(|m| m.tag == Tag::Refute)
        .count() as u32
}

impl HumanAgent for ScriptedHuman {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<Evaluation, AgentError> {
        match self.policy_for(request)? {
            Policy::Steps(steps) => {
                let last = steps
                    .last()
                    .ok_or_else(|| AgentError::Policy("empty step list".into()))?;
                let step = steps.get(request.prior_evaluations()).unwrap_or(last);
                Ok(from_step(step))
            }
            Policy::Checker(rule) => {
                let hook = CheckerHook::new(rule.checker.clone(), Duration::from_secs(rule.timeout_secs));
                let text = match hook.run(request.program) {
                    CheckOutcome::Pass => return Ok(Evaluation::ratify()),
                    CheckOutcome::Fail(text) => text,
                    CheckOutcome::TimedOut => "checker timed out".to_string(),
                };
                let failures = trailing_failures(request) + 1;
                if rule.then == Then::Reject && failures >= rule.max_failures && request.reject_allowed() {
                    Ok(Evaluation::reject(Some(text)))
                } else {
                    Ok(Evaluation::refute(text))
                }
            }
        }
    }

    fn runs_code(&self) -> bool {
        self.policy.runs_code()
    }
}
