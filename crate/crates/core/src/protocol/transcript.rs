//! Line-delimited JSON transcript schema, one message per line.
//!
//! ```json
//! {"v":1,"process":"P1","attempt":1,"index":1,"sender":"machine","tag":"REVISE",
//!  "program":"<sha256 hex>","explanation":"...","match":null,"agree":null,
//!  "synthetic":false,"ts":"2024-05-01T10:00:00Z"}
//! ```
//!
//! `program` is `null` for the `?` placeholder, `"empty"` for the empty
//! program, otherwise the SHA-256 of the program text (stored separately,
//! content-addressed).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Judgment, Limits, Message, Outcome, ProgramText, Sender, Session, Tag};
use crate::clock::Timestamp;
use crate::dfd::{ProcessSpec, VertexId};

pub const TRANSCRIPT_VERSION: u32 = 1;
const EMPTY_PROGRAM: &str = "empty";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub v: u32,
    pub process: String,
    pub attempt: u32,
    pub index: u32,
    pub sender: Sender,
    pub tag: Tag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ProcessSpec>,
    pub program: Option<String>,
    pub explanation: Option<String>,
    #[serde(rename = "match")]
    pub matches: Option<bool>,
    #[serde(rename = "agree")]
    pub agrees: Option<bool>,
    pub synthetic: bool,
    pub ts: Timestamp,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("transcript line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("transcript line {line}: unsupported schema version {version}")]
    Version { line: usize, version: u32 },
    #[error("transcript line {line}: program {hash} not found")]
    MissingProgram { line: usize, hash: String },
    #[error("transcript line {line}: belongs to process {found}, expected {expected}")]
    WrongProcess {
        line: usize,
        found: String,
        expected: String,
    },
}

impl TranscriptLine {
    pub fn from_message(process: &VertexId, m: &Message) -> Self {
        TranscriptLine {
            v: TRANSCRIPT_VERSION,
            process: process.to_string(),
            attempt: m.attempt,
            index: m.index,
            sender: m.sender,
            tag: m.tag,
            spec: m.spec.clone(),
            program: m
                .program
                .as_ref()
                .map(|p| p.content_hash().unwrap_or_else(|| EMPTY_PROGRAM.to_string())),
            explanation: m.explanation.clone(),
            matches: m.judgment.map(|j| j.matches),
            agrees: m.judgment.map(|j| j.agrees),
            synthetic: m.synthetic,
            ts: m.timestamp,
        }
    }
}

/// Serialize a session as JSONL (trailing newline after every line).
pub fn encode_session(session: &Session) -> String {
    let mut out = String::new();
    for m in &session.messages {
        let line = TranscriptLine::from_message(&session.process_id, m);
        out.push_str(&serde_json::to_string(&line).expect("transcript line serializes"));
        out.push('\n');
    }
    out
}

/// Rebuild a session from JSONL. `resolve` maps a program hash to its text.
/// The outcome is recovered from the closing TERM, if any.
pub fn decode_session(
    process_id: &VertexId,
    limits: Limits,
    exempt: bool,
    text: &str,
    resolve: impl Fn(&str) -> Option<String>,
) -> Result<Session, TranscriptError> {
    let mut session = Session::new(process_id.clone(), limits);
    session.exempt = exempt;
    for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let line_no = i + 1;
        let line: TranscriptLine = serde_json::from_str(raw).map_err(|e| TranscriptError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.v != TRANSCRIPT_VERSION {
            return Err(TranscriptError::Version {
                line: line_no,
                version: line.v,
            });
        }
        if line.process != process_id.as_str() {
            return Err(TranscriptError::WrongProcess {
                line: line_no,
                found: line.process,
                expected: process_id.to_string(),
            });
        }
        let program = match line.program.as_deref() {
            None => None,
            Some(EMPTY_PROGRAM) => Some(ProgramText::Empty),
            Some(hash) => Some(ProgramText::new(resolve(hash).ok_or_else(|| {
                TranscriptError::MissingProgram {
                    line: line_no,
                    hash: hash.to_string(),
                }
            })?)),
        };
        let judgment = match (line.matches, line.agrees) {
            (Some(m), Some(a)) => Some(Judgment::new(m, a)),
            _ => None,
        };
        session.messages.push(Message {
            attempt: line.attempt,
            index: line.index,
            sender: line.sender,
            tag: line.tag,
            spec: line.spec,
            program,
            explanation: line.explanation,
            judgment,
            synthetic: line.synthetic,
            timestamp: line.ts,
        });
    }
    session.outcome =
        session
            .messages
            .last()
            .filter(|m| m.tag == Tag::Term)
            .map(|term| match term.explanation.as_deref() {
                Some("ratified") => Outcome::Ratified(term.program.clone().unwrap_or(ProgramText::Empty)),
                Some("rejected") => Outcome::Rejected,
                _ => Outcome::Exhausted,
            });
    Ok(session)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::protocol::SessionBuilder;

    #[test]
    fn round_trip_through_jsonl() {
        let s = SessionBuilder::new("P2", Limits::default())
            .init()
            .machine(Tag::Revise, "import os\nprint(os.getcwd())", "prints cwd")
            .human(Tag::Refute, "ValueError: bad path")
            .machine(Tag::Revise, "", "no code this time")
            .human(Tag::Refute, "no program found")
            .finish();
        let text = encode_session(&s);
        assert_eq!(text.lines().count(), s.messages.len());
        let programs: HashMap<String, String> = s
            .messages
            .iter()
            .filter_map(|m| m.program.as_ref())
            .filter_map(|p| Some((p.content_hash()?, p.as_str()?.to_string())))
            .collect();
        let back = decode_session(&s.process_id, s.limits, false, &text, |h| programs.get(h).cloned()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_program_hash_is_an_error() {
        let s = SessionBuilder::new("P1", Limits::default())
            .init()
            .machine(Tag::Revise, "x = 1", "")
            .build();
        let err = decode_session(&s.process_id, s.limits, false, &encode_session(&s), |_| None).unwrap_err();
        assert!(matches!(err, TranscriptError::MissingProgram { line: 2, .. }));
    }
}
