//! Intelligibility classification of finished sessions.
//!
//! Implements sufficient conditions only:
//! - one-way intelligible for the human: the session contains a human
//!   `RATIFY` and terminates immediately after it;
//! - one-way intelligible for the machine: the machine sent at least one
//!   `REVISE`.
//!
//! Both are functions of the (sender, tag) sequence alone.

use serde::{Deserialize, Serialize};

use super::{check_legal, Sender, Session, Tag, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intelligibility {
    pub one_way_human: bool,
    pub one_way_machine: bool,
}

impl Intelligibility {
    /// Conjunction of the two one-way flags. This is a derived reading, not a
    /// full two-way intelligibility decision procedure.
    pub fn two_way(&self) -> bool {
        self.one_way_human && self.one_way_machine
    }
}

pub fn classify_intelligibility(session: &Session) -> Result<Intelligibility, Vec<Violation>> {
    let violations = check_legal(session);
    if !violations.is_empty() {
        return Err(violations);
    }
    let tags: Vec<(Sender, Tag)> = session.tags().collect();
    let one_way_human = tags.iter().enumerate().any(|(i, &(sender, tag))| {
        sender == Sender::Human && tag == Tag::Ratify && tags.get(i + 1).is_none_or(|&(_, next)| next == Tag::Term)
    });
    let one_way_machine = tags
        .iter()
        .any(|&(sender, tag)| sender == Sender::Machine && tag == Tag::Revise);
    Ok(Intelligibility {
        one_way_human,
        one_way_machine,
    })
}
