//! Transcript legality.

use std::fmt;

use super::{human_tag_options, machine_tag_options, Message, Outcome, Sender, Session, Tag};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptySession,
    AttemptNumbering {
        position: usize,
    },
    MissingInit {
        attempt: u32,
    },
    MisplacedInit {
        attempt: u32,
        index: u32,
    },
    IndexGap {
        attempt: u32,
        index: u32,
    },
    NotAlternating {
        attempt: u32,
        index: u32,
    },
    HumanRevise {
        attempt: u32,
        index: u32,
    },
    MachineReject {
        attempt: u32,
        index: u32,
    },
    UnexpectedTag {
        sender: Sender,
        tag: Tag,
        attempt: u32,
        index: u32,
    },
    RejectBeforeGate {
        attempt: u32,
        exchange: u32,
        m: u32,
    },
    Placeholder {
        attempt: u32,
        index: u32,
    },
    InitWithoutSpec {
        attempt: u32,
    },
    ProgramNotEchoed {
        attempt: u32,
        index: u32,
    },
    JudgmentMismatch {
        attempt: u32,
        index: u32,
        tag: Tag,
    },
    ContinuesAfterDecision {
        attempt: u32,
        index: u32,
    },
    RatifyAndReject,
    TooManyExchanges {
        attempt: u32,
        n: u32,
    },
    TooManyAttempts {
        attempts: u32,
        r: u32,
    },
    DanglingMachineMessage {
        attempt: u32,
    },
    TermNotLast,
    TermSender(Sender),
    MissingTerm,
    TermWithoutOutcome,
    OutcomeMismatch {
        recorded: String,
        derived: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            EmptySession => f.write_str("session has no messages"),
            AttemptNumbering { position } => {
                write!(f, "attempt numbering broken at transcript line {position}")
            }
            MissingInit { attempt } => write!(f, "attempt {attempt} does not open with INIT"),
            MisplacedInit { attempt, index } => {
                write!(f, "INIT at message {index} of attempt {attempt}")
            }
            IndexGap { attempt, index } => {
                write!(f, "message index {index} out of sequence in attempt {attempt}")
            }
            NotAlternating { attempt, index } => write!(
                f,
                "message {index} of attempt {attempt} breaks human/machine alternation"
            ),
            HumanRevise { attempt, index } => {
                write!(f, "human sent REVISE (attempt {attempt}, message {index})")
            }
            MachineReject { attempt, index } => {
                write!(f, "machine sent REJECT (attempt {attempt}, message {index})")
            }
            UnexpectedTag {
                sender,
                tag,
                attempt,
                index,
            } => write!(f, "{sender} sent {tag} (attempt {attempt}, message {index})"),
            RejectBeforeGate { attempt, exchange, m } => write!(
                f,
                "REJECT before message m (exchange {exchange} of attempt {attempt}, m = {m})"
            ),
            Placeholder { attempt, index } => {
                write!(f, "'?' component outside INIT (attempt {attempt}, message {index})")
            }
            InitWithoutSpec { attempt } => write!(f, "INIT of attempt {attempt} carries no spec"),
            ProgramNotEchoed { attempt, index } => write!(
                f,
                "human message {index} of attempt {attempt} does not carry the program it answers"
            ),
            JudgmentMismatch { attempt, index, tag } => write!(
                f,
                "{tag} not allowed by the recorded match/agree judgment (attempt {attempt}, message {index})"
            ),
            ContinuesAfterDecision { attempt, index } => write!(
                f,
                "session continues after human RATIFY/REJECT (attempt {attempt}, message {index})"
            ),
            RatifyAndReject => f.write_str("session contains both RATIFY and REJECT"),
            TooManyExchanges { attempt, n } => {
                write!(f, "attempt {attempt} exceeds n = {n} exchanges")
            }
            TooManyAttempts { attempts, r } => write!(f, "{attempts} attempts exceed R = {r}"),
            DanglingMachineMessage { attempt } => write!(
                f,
                "attempt {attempt} ends on an unanswered machine message but is followed by another attempt"
            ),
            TermNotLast => f.write_str("TERM is not the final message"),
            TermSender(sender) => write!(f, "TERM sent by {sender}"),
            MissingTerm => f.write_str("finished session lacks a closing TERM"),
            TermWithoutOutcome => f.write_str("TERM present but session has no outcome"),
            OutcomeMismatch { recorded, derived } => {
                write!(f, "recorded outcome {recorded} but transcript implies {derived}")
            }
        }
    }
}

fn derived_outcome(body: &[Message]) -> Outcome {
    match body.last() {
        Some(m) if m.sender == Sender::Human && m.tag == Tag::Ratify => {
            Outcome::Ratified(m.program.clone().unwrap_or(super::ProgramText::Empty))
        }
        Some(m) if m.sender == Sender::Human && m.tag == Tag::Reject => Outcome::Rejected,
        _ => Outcome::Exhausted,
    }
}

/// Every protocol violation in `session`; empty iff the transcript is legal.
pub fn check_legal(session: &Session) -> Vec<Violation> {
    let mut out = Vec::new();
    let msgs = &session.messages;
    if msgs.is_empty() {
        out.push(Violation::EmptySession);
        return out;
    }
    let limits = session.limits;

    let term_last = msgs.last().is_some_and(|m| m.tag == Tag::Term);
    let body = if term_last { &msgs[..msgs.len() - 1] } else { &msgs[..] };
    if body.iter().any(|m| m.tag == Tag::Term) {
        out.push(Violation::TermNotLast);
    }
    if let Some(term) = msgs.last().filter(|_| term_last) {
        if term.sender != Sender::Engine {
            out.push(Violation::TermSender(term.sender));
        }
    }

    let mut attempt = 0u32;
    let mut last_index = 0u32;
    let mut over_bound_reported = 0u32;
    let mut previous: Option<&Message> = None;
    let mut decisions: Vec<(Tag, usize)> = Vec::new();

    for (pos, m) in body.iter().enumerate() {
        if m.tag == Tag::Term {
            continue;
        }
        if m.tag == Tag::Init {
            if m.attempt != attempt + 1 {
                out.push(Violation::AttemptNumbering { position: pos });
            }
            if m.index != 0 {
                out.push(Violation::MisplacedInit {
                    attempt: m.attempt,
                    index: m.index,
                });
            }
            if m.sender != Sender::Human {
                out.push(Violation::UnexpectedTag {
                    sender: m.sender,
                    tag: m.tag,
                    attempt: m.attempt,
                    index: m.index,
                });
            }
            if m.spec.is_none() {
                out.push(Violation::InitWithoutSpec { attempt: m.attempt });
            }
            if let Some(prev) = previous {
                if prev.sender == Sender::Machine {
                    out.push(Violation::DanglingMachineMessage { attempt: prev.attempt });
                }
            }
            attempt = m.attempt;
            last_index = 0;
            previous = Some(m);
            continue;
        }

        if pos == 0 || m.attempt != attempt {
            if m.attempt != attempt {
                out.push(Violation::AttemptNumbering { position: pos });
            }
            out.push(Violation::MissingInit { attempt: m.attempt });
        } else if m.index != last_index + 1 {
            out.push(Violation::IndexGap {
                attempt: m.attempt,
                index: m.index,
            });
        }
        last_index = m.index;

        let expected = if m.index % 2 == 1 {
            Sender::Machine
        } else {
            Sender::Human
        };
        if m.sender != expected {
            out.push(Violation::NotAlternating {
                attempt: m.attempt,
                index: m.index,
            });
        }

        match (m.sender, m.tag) {
            (Sender::Human, Tag::Revise) => out.push(Violation::HumanRevise {
                attempt: m.attempt,
                index: m.index,
            }),
            (Sender::Machine, Tag::Reject) => out.push(Violation::MachineReject {
                attempt: m.attempt,
                index: m.index,
            }),
            (Sender::Human, Tag::Ratify | Tag::Refute | Tag::Reject)
            | (Sender::Machine, Tag::Ratify | Tag::Refute | Tag::Revise) => {}
            (sender, tag) => out.push(Violation::UnexpectedTag {
                sender,
                tag,
                attempt: m.attempt,
                index: m.index,
            }),
        }

        if m.program.is_none() || m.explanation.is_none() {
            out.push(Violation::Placeholder {
                attempt: m.attempt,
                index: m.index,
            });
        }

        let exchange = m.exchange();
        if exchange > limits.messages && over_bound_reported != m.attempt {
            over_bound_reported = m.attempt;
            out.push(Violation::TooManyExchanges {
                attempt: m.attempt,
                n: limits.messages,
            });
        }

        if m.sender == Sender::Human {
            if let Some(prev) = previous.filter(|p| p.sender == Sender::Machine) {
                if prev.program != m.program {
                    out.push(Violation::ProgramNotEchoed {
                        attempt: m.attempt,
                        index: m.index,
                    });
                }
            }
            if m.tag == Tag::Reject && exchange <= limits.reject_after {
                out.push(Violation::RejectBeforeGate {
                    attempt: m.attempt,
                    exchange,
                    m: limits.reject_after,
                });
            }
            if matches!(m.tag, Tag::Ratify | Tag::Reject) {
                decisions.push((m.tag, pos));
            }
        }

        if let Some(j) = m.judgment {
            let allowed = match m.sender {
                Sender::Human => human_tag_options(j.matches, j.agrees, exchange, limits.reject_after),
                _ => machine_tag_options(j.matches, j.agrees),
            };
            if !allowed.contains(&m.tag) {
                out.push(Violation::JudgmentMismatch {
                    attempt: m.attempt,
                    index: m.index,
                    tag: m.tag,
                });
            }
        }
        previous = Some(m);
    }

    if attempt > limits.retries {
        out.push(Violation::TooManyAttempts {
            attempts: attempt,
            r: limits.retries,
        });
    }

    let has_ratify = decisions.iter().any(|(t, _)| *t == Tag::Ratify);
    let has_reject = decisions.iter().any(|(t, _)| *t == Tag::Reject);
    if has_ratify && has_reject {
        out.push(Violation::RatifyAndReject);
    }
    for &(_, pos) in &decisions {
        if pos + 1 != body.len() {
            let next = &body[pos + 1];
            out.push(Violation::ContinuesAfterDecision {
                attempt: next.attempt,
                index: next.index,
            });
        }
    }

    match (&session.outcome, term_last) {
        (Some(recorded), true) => {
            let derived = derived_outcome(body);
            let term = msgs.last().expect("term_last implies a message");
            let term_agrees = term.explanation.as_deref() == Some(recorded.as_str());
            if *recorded != derived || !term_agrees {
                out.push(Violation::OutcomeMismatch {
                    recorded: recorded.as_str().into(),
                    derived: derived.as_str().into(),
                });
            }
        }
        (Some(_), false) => out.push(Violation::MissingTerm),
        (None, true) => out.push(Violation::TermWithoutOutcome),
        (None, false) => {}
    }

    out
}
