//! Hand-assembly of transcripts, for fixtures and tests.

use chrono::{TimeZone, Utc};

use super::{Judgment, Limits, Message, Outcome, ProgramText, Sender, Session, Tag};
use crate::clock::Timestamp;
use crate::dfd::{ProcessSpec, VertexId};

/// Builds a [`Session`] message by message. Positions, attempt numbers,
/// program echoes and timestamps are filled in; nothing is validated, so
/// illegal transcripts can be built on purpose.
#[derive(Debug, Clone)]
pub struct SessionBuilder {
    session: Session,
    spec: ProcessSpec,
    attempt: u32,
    index: u32,
    tick: i64,
}

impl SessionBuilder {
    pub fn new(process_id: impl Into<String>, limits: Limits) -> Self {
        Self {
            session: Session::new(VertexId::new(process_id), limits),
            spec: ProcessSpec::new("describe the sub-task", "inputs exist", "outputs exist"),
            attempt: 0,
            index: 0,
            tick: 0,
        }
    }

    pub fn spec(mut self, spec: ProcessSpec) -> Self {
        self.spec = spec;
        self
    }

    fn stamp(&mut self) -> Timestamp {
        self.tick += 1;
        Utc.timestamp_opt(1_700_000_000 + self.tick, 0).unwrap()
    }

    /// Opens a new attempt.
    pub fn init(mut self) -> Self {
        self.attempt += 1;
        self.index = 0;
        let ts = self.stamp();
        self.session
            .messages
            .push(Message::init(self.attempt, self.spec.clone(), ts));
        self
    }

    pub fn machine(mut self, tag: Tag, program: &str, explanation: &str) -> Self {
        self.index += 1;
        let timestamp = self.stamp();
        self.session.messages.push(Message {
            attempt: self.attempt,
            index: self.index,
            sender: Sender::Machine,
            tag,
            spec: None,
            program: Some(ProgramText::new(program)),
            explanation: Some(explanation.into()),
            judgment: None,
            synthetic: false,
            timestamp,
        });
        self
    }

    /// Human reply echoing the last machine program.
    pub fn human(mut self, tag: Tag, text: &str) -> Self {
        self.index += 1;
        let program = self
            .session
            .last_machine()
            .and_then(|m| m.program.clone())
            .or(Some(ProgramText::Empty));
        let timestamp = self.stamp();
        self.session.messages.push(Message {
            attempt: self.attempt,
            index: self.index,
            sender: Sender::Human,
            tag,
            spec: None,
            program,
            explanation: Some(text.into()),
            judgment: None,
            synthetic: false,
            timestamp,
        });
        self
    }

    pub fn judged(mut self, judgment: Judgment) -> Self {
        if let Some(last) = self.session.messages.last_mut() {
            last.judgment = Some(judgment);
        }
        self
    }

    /// Appends a raw message at the next position, for building illegal
    /// transcripts.
    pub fn raw(mut self, sender: Sender, tag: Tag) -> Self {
        self.index += 1;
        let timestamp = self.stamp();
        self.session.messages.push(Message {
            attempt: self.attempt.max(1),
            index: self.index,
            sender,
            tag,
            spec: None,
            program: Some(ProgramText::new("pass")),
            explanation: Some(String::new()),
            judgment: None,
            synthetic: false,
            timestamp,
        });
        self
    }

    /// The transcript so far, still open.
    pub fn build(self) -> Session {
        self.session
    }

    /// Closes with TERM and the outcome implied by the last message.
    pub fn finish(mut self) -> Session {
        let outcome = match self.session.messages.last() {
            Some(m) if m.sender == Sender::Human && m.tag == Tag::Ratify => {
                Outcome::Ratified(m.program.clone().unwrap_or(ProgramText::Empty))
            }
            Some(m) if m.sender == Sender::Human && m.tag == Tag::Reject => Outcome::Rejected,
            _ => Outcome::Exhausted,
        };
        let program = match &outcome {
            Outcome::Ratified(p) => p.clone(),
            _ => ProgramText::Empty,
        };
        self.index += 1;
        let timestamp = self.stamp();
        self.session.messages.push(Message {
            attempt: self.attempt.max(1),
            index: self.index,
            sender: Sender::Engine,
            tag: Tag::Term,
            spec: None,
            program: Some(program),
            explanation: Some(outcome.as_str().into()),
            judgment: None,
            synthetic: true,
            timestamp,
        });
        self.session.outcome = Some(outcome);
        self.session
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{check_legal, classify_intelligibility, Violation};

    fn limits(m: u32) -> Limits {
        Limits {
            retries: 5,
            messages: 10,
            reject_after: m,
        }
    }

    #[test]
    fn shortest_ratified_session_is_legal() {
        let s = SessionBuilder::new("P1", limits(1))
            .init()
            .machine(Tag::Revise, "print(1)", "prints one")
            .human(Tag::Ratify, "")
            .finish();
        assert_eq!(check_legal(&s), vec![]);
    }

    #[test]
    fn human_revise_is_flagged() {
        let s = SessionBuilder::new("P1", limits(6))
            .init()
            .machine(Tag::Revise, "a", "e")
            .human(Tag::Revise, "no")
            .build();
        let v = check_legal(&s);
        assert!(
            v.iter().any(|v| v.to_string().starts_with("human sent REVISE")),
            "{v:?}"
        );
    }

    #[test]
    fn early_reject_is_flagged() {
        // human REJECT at position 4 = exchange 2, gate m = 6
        let s = SessionBuilder::new("P1", limits(6))
            .init()
            .machine(Tag::Revise, "a", "e")
            .human(Tag::Refute, "wrong")
            .machine(Tag::Revise, "b", "e")
            .human(Tag::Reject, "giving up")
            .finish();
        assert_eq!(s.messages[4].index, 4);
        let v = check_legal(&s);
        assert!(
            v.iter().any(|v| matches!(v, Violation::RejectBeforeGate { .. })
                && v.to_string().contains("REJECT before message m")),
            "{v:?}"
        );
    }

    #[test]
    fn machine_reject_and_both_decisions() {
        let s = SessionBuilder::new("P1", limits(0))
            .init()
            .machine(Tag::Reject, "a", "e")
            .human(Tag::Ratify, "")
            .machine(Tag::Revise, "b", "e")
            .human(Tag::Reject, "")
            .finish();
        let v = check_legal(&s);
        assert!(v.contains(&Violation::MachineReject { attempt: 1, index: 1 }));
        assert!(v.contains(&Violation::RatifyAndReject));
        assert!(v.iter().any(|v| matches!(v, Violation::ContinuesAfterDecision { .. })));
    }

    #[test]
    fn judgment_must_match_table() {
        let s = SessionBuilder::new("P1", limits(6))
            .init()
            .machine(Tag::Revise, "a", "e")
            .human(Tag::Ratify, "")
            .judged(Judgment::new(false, true))
            .finish();
        assert!(matches!(
            check_legal(&s)[..],
            [Violation::JudgmentMismatch { tag: Tag::Ratify, .. }]
        ));
    }

    #[test]
    fn retries_restart_positions() {
        let limits = Limits {
            retries: 2,
            messages: 1,
            reject_after: 1,
        };
        let s = SessionBuilder::new("P1", limits)
            .init()
            .machine(Tag::Revise, "a", "e")
            .human(Tag::Refute, "no")
            .init()
            .machine(Tag::Revise, "b", "e")
            .human(Tag::Ratify, "")
            .finish();
        assert_eq!(check_legal(&s), vec![]);

        let over = SessionBuilder::new("P1", limits)
            .init()
            .machine(Tag::Revise, "a", "e")
            .human(Tag::Refute, "no")
            .machine(Tag::Revise, "b", "e")
            .human(Tag::Refute, "no")
            .finish();
        assert!(check_legal(&over).contains(&Violation::TooManyExchanges { attempt: 1, n: 1 }));
    }

    #[test]
    fn outcome_must_agree_with_transcript() {
        let mut s = SessionBuilder::new("P1", limits(6))
            .init()
            .machine(Tag::Revise, "a", "e")
            .human(Tag::Refute, "no")
            .finish();
        s.outcome = Some(Outcome::Rejected);
        assert!(matches!(check_legal(&s)[..], [Violation::OutcomeMismatch { .. }]));
    }

    #[test]
    fn classification_examples() {
        let both = SessionBuilder::new("P1", limits(6))
            .init()
            .machine(Tag::Revise, "a", "e")
            .human(Tag::Refute, "no")
            .machine(Tag::Revise, "b", "e")
            .human(Tag::Ratify, "")
            .finish();
        let c = classify_intelligibility(&both).unwrap();
        assert!(c.one_way_human && c.one_way_machine && c.two_way());

        let refute_only = SessionBuilder::new("P1", limits(6))
            .init()
            .machine(Tag::Refute, "a", "e")
            .human(Tag::Ratify, "")
            .finish();
        let c = classify_intelligibility(&refute_only).unwrap();
        assert!(c.one_way_human && !c.one_way_machine);

        let illegal = SessionBuilder::new("P1", limits(6))
            .init()
            .machine(Tag::Revise, "a", "e")
            .human(Tag::Revise, "x")
            .build();
        assert!(classify_intelligibility(&illegal).is_err());
    }
}
