//! The tagged message protocol between the human engineer and the LLM.
//!
//! Every exchange is a [`Message`] `(tag, (spec, program, explanation))`. A
//! [`Session`] holds all messages exchanged while constructing one process,
//! across retry attempts; each attempt opens with a human `INIT` and the
//! session closes with an engine-emitted `TERM` recording the outcome.
//!
//! Positions: inside an attempt the `INIT` sits at index 0, machine replies at
//! odd indices and human replies at even indices. The *exchange number* of a
//! message is `(index + 1) / 2`, i.e. how many machine programs have been
//! received so far in the attempt. The `REJECT` gate `m` and the per-attempt
//! bound `n` are both counted in exchanges.

mod builder;
mod intelligibility;
mod legality;
mod tables;
mod transcript;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::dfd::{ProcessSpec, VertexId};
use crate::hash::sha256_hex;

pub use builder::SessionBuilder;
pub use intelligibility::{classify_intelligibility, Intelligibility};
pub use legality::{check_legal, Violation};
pub use tables::{human_tag_options, machine_tag_options, TagSet};
pub use transcript::{decode_session, encode_session, TranscriptError, TranscriptLine, TRANSCRIPT_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tag {
    Init,
    Ratify,
    Refute,
    Revise,
    Reject,
    Term,
}

impl Tag {
    pub const ALL: [Tag; 6] = [Tag::Init, Tag::Ratify, Tag::Refute, Tag::Revise, Tag::Reject, Tag::Term];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Init => "INIT",
            Tag::Ratify => "RATIFY",
            Tag::Refute => "REFUTE",
            Tag::Revise => "REVISE",
            Tag::Reject => "REJECT",
            Tag::Term => "TERM",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Tag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown tag `{s}`"))
    }
}

/// `Engine` only ever sends `TERM`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sender {
    Human,
    Machine,
    Engine,
}

impl fmt::Display for Sender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sender::Human => "human",
            Sender::Machine => "machine",
            Sender::Engine => "engine",
        })
    }
}

/// Program source text, or the distinguished empty program.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ProgramText {
    Empty,
    Source(String),
}

impl ProgramText {
    /// Whitespace-only text is the empty program.
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        if text.trim().is_empty() {
            ProgramText::Empty
        } else {
            ProgramText::Source(text)
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, ProgramText::Empty)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ProgramText::Empty => None,
            ProgramText::Source(s) => Some(s),
        }
    }

    pub fn content_hash(&self) -> Option<String> {
        self.as_str().map(sha256_hex)
    }

    /// Trimmed form used for change detection.
    pub fn normalized(&self) -> &str {
        self.as_str().map_or("", str::trim)
    }
}

impl fmt::Display for ProgramText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProgramText::Empty => f.write_str("\u{25a1}"),
            ProgramText::Source(s) => f.write_str(s),
        }
    }
}

/// An agent's internal Match/Agree judgments about what it received.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Judgment {
    #[serde(rename = "match")]
    pub matches: bool,
    #[serde(rename = "agree")]
    pub agrees: bool,
}

impl Judgment {
    pub const fn new(matches: bool, agrees: bool) -> Self {
        Self { matches, agrees }
    }
}

/// Session bounds: retries `R`, exchanges per attempt `n`, REJECT gate `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    #[serde(rename = "R")]
    pub retries: u32,
    #[serde(rename = "n")]
    pub messages: u32,
    #[serde(rename = "m")]
    pub reject_after: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            retries: 5,
            messages: 10,
            reject_after: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    /// 1-based retry attempt.
    pub attempt: u32,
    /// Position within the attempt; the INIT is 0.
    pub index: u32,
    pub sender: Sender,
    pub tag: Tag,
    pub spec: Option<ProcessSpec>,
    /// `None` is the `?` placeholder.
    pub program: Option<ProgramText>,
    /// `None` is the `?` placeholder.
    pub explanation: Option<String>,
    pub judgment: Option<Judgment>,
    /// Composed by the engine on an agent's behalf (INIT, "no program found").
    pub synthetic: bool,
    pub timestamp: Timestamp,
}

impl Message {
    pub fn exchange(&self) -> u32 {
        self.index.div_ceil(2)
    }

    pub fn init(attempt: u32, spec: ProcessSpec, timestamp: Timestamp) -> Self {
        Message {
            attempt,
            index: 0,
            sender: Sender::Human,
            tag: Tag::Init,
            spec: Some(spec),
            program: None,
            explanation: None,
            judgment: None,
            synthetic: true,
            timestamp,
        }
    }

    /// Content equality ignoring the timestamp.
    pub fn same_content(&self, other: &Message) -> bool {
        Message {
            timestamp: other.timestamp,
            ..self.clone()
        } == *other
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ratified(ProgramText),
    Rejected,
    Exhausted,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Ratified(_) => "ratified",
            Outcome::Rejected => "rejected",
            Outcome::Exhausted => "exhausted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub process_id: VertexId,
    pub limits: Limits,
    pub messages: Vec<Message>,
    /// `None` while the session is still running.
    pub outcome: Option<Outcome>,
    /// Free-form baseline transcript; the tag protocol does not apply.
    pub exempt: bool,
}

impl Session {
    pub fn new(process_id: VertexId, limits: Limits) -> Self {
        Self {
            process_id,
            limits,
            messages: Vec::new(),
            outcome: None,
            exempt: false,
        }
    }

    pub fn tags(&self) -> impl Iterator<Item = (Sender, Tag)> + '_ {
        self.messages.iter().map(|m| (m.sender, m.tag))
    }

    /// Human-authored messages other than INIT and TERM: the unit of the
    /// "interactions" effort count.
    pub fn human_interactions(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| m.sender == Sender::Human && m.tag != Tag::Init && !m.synthetic)
            .count()
    }

    pub fn machine_messages(&self) -> usize {
        self.messages.iter().filter(|m| m.sender == Sender::Machine).count()
    }

    pub fn attempts(&self) -> u32 {
        self.messages.iter().map(|m| m.attempt).max().unwrap_or(0)
    }

    pub fn last_machine(&self) -> Option<&Message> {
        self.messages.iter().rev().find(|m| m.sender == Sender::Machine)
    }

    pub fn is_finished(&self) -> bool {
        self.outcome.is_some()
    }
}
