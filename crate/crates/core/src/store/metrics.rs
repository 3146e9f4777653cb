use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::protocol::{check_legal, ProgramText, Sender, Session, Tag};

pub const METRICS_VERSION: u32 = 1;

pub const COUNTING_RULE: &str = "interactions = human-authored messages other than INIT and TERM, summed over sessions";
pub const LINE_RULE: &str = "lines_of_code = non-blank physical lines of the assembled program";

/// Effort figures for one run, computed from its transcripts alone.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub v: u32,
    pub interactions: usize,
    pub machine_calls: usize,
    /// Attempts opened per session's process, as counted against `R`.
    pub retries_per_process: BTreeMap<String, u32>,
    pub lines_of_code: usize,
    pub wall_clock: WallClock,
    /// Set when the run had not finished; the counts cover what exists.
    pub incomplete: bool,
    #[serde(default)]
    pub flags: Vec<String>,
    /// Sessions that fail the protocol rules.
    #[serde(default)]
    pub illegal_sessions: Vec<usize>,
    /// Free-form baseline sessions, outside the protocol.
    #[serde(default)]
    pub exempt_sessions: Vec<usize>,
    pub counting_rule: String,
    pub line_rule: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    /// First to last message over the whole run.
    pub total_secs: f64,
    pub per_session_secs: Vec<f64>,
}

pub fn count_lines(text: &str) -> usize {
    text.lines().filter(|l| !l.trim().is_empty()).count()
}

pub fn metrics(record: &RunRecord) -> MetricSet {
    let mut m = metrics_for(&record.sessions, record.assembled().as_ref(), record.is_complete());
    if !record.is_complete() {
        m.flags.insert(0, format!("run status is {:?}", record.manifest.status));
    }
    m
}

/// Metrics over `sessions` and the assembled program. `complete` says
/// whether the run finished; if not the result is flagged partial.
pub fn metrics_for(sessions: &[Session], assembled: Option<&ProgramText>, complete: bool) -> MetricSet {
    let mut m = MetricSet {
        v: METRICS_VERSION,
        counting_rule: COUNTING_RULE.into(),
        line_rule: LINE_RULE.into(),
        incomplete: !complete,
        ..MetricSet::default()
    };
    let mut first = None;
    let mut last = None;
    for (k, s) in sessions.iter().enumerate() {
        m.interactions += s.human_interactions();
        m.machine_calls += s.machine_messages();
        let attempts = s
            .messages
            .iter()
            .filter(|x| x.sender == Sender::Human && x.tag == Tag::Init)
            .count() as u32;
        *m.retries_per_process.entry(s.process_id.to_string()).or_default() += attempts;
        if s.exempt {
            m.exempt_sessions.push(k);
        } else if !check_legal(s).is_empty() {
            m.illegal_sessions.push(k);
        }
        if !s.is_finished() {
            m.incomplete = true;
            m.flags.push(format!("session {k} ({}) has no TERM", s.process_id));
        }
        if let (Some(a), Some(b)) = (s.messages.first(), s.messages.last()) {
            m.wall_clock.per_session_secs.push(secs(b.timestamp - a.timestamp));
            first = Some(first.map_or(a.timestamp, |f: crate::clock::Timestamp| f.min(a.timestamp)));
            last = Some(last.map_or(b.timestamp, |l: crate::clock::Timestamp| l.max(b.timestamp)));
        } else {
            m.wall_clock.per_session_secs.push(0.0);
        }
    }
    if let (Some(a), Some(b)) = (first, last) {
        m.wall_clock.total_secs = secs(b - a);
    }
    if let Some(text) = assembled.and_then(ProgramText::as_str) {
        m.lines_of_code = count_lines(text);
    }
    if !m.illegal_sessions.is_empty() {
        m.flags.push(format!("illegal sessions: {:?}", m.illegal_sessions));
    }
    m
}

fn secs(d: chrono::TimeDelta) -> f64 {
    d.num_milliseconds() as f64 / 1000.0
}
