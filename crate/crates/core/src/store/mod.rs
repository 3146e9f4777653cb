//! Run directories on disk.
//!
//! ```text
//! <root>/runs/<id>/manifest.json     config, ordering, per-process status
//! <root>/runs/<id>/dfd.json          the background document
//! <root>/runs/<id>/sessions/<k>.jsonl
//! <root>/runs/<id>/programs/<sha256> program text, content-addressed
//! <root>/runs/<id>/llm.jsonl         every model request, append-only
//! <root>/runs/<id>/context.json
//! <root>/runs/<id>/metrics.json
//! ```
//!
//! Every file except `llm.jsonl` is replaced atomically (temp file, then
//! rename). A crash can only tear the last line of `llm.jsonl`, which
//! [`Store::load`] drops.

mod checkpoint;
mod metrics;
mod replay;

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Timestamp;
use crate::context::Context;
use crate::dfd::{parse_background, Background, VertexId};
use crate::engine::{assemble, Mode, RunConfig, RunPhase, RunState, RunStatus};
use crate::hash::sha256_hex;
use crate::llm::{LlmLogEntry, ModelInfo};
use crate::protocol::{decode_session, encode_session, Outcome, ProgramText, Session, TranscriptError};

pub use checkpoint::{Checkpointer, Tee};
pub use metrics::{count_lines, metrics, metrics_for, MetricSet, COUNTING_RULE, LINE_RULE};
pub use replay::{replay, replay_with_human, resume, run_checkpointed, ReplayReport};

pub const MANIFEST_VERSION: u32 = 1;
const EMPTY: &str = "empty";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("run {0} not found")]
    NotFound(String),
    #[error("run {0} already exists")]
    Exists(String),
    #[error("integrity check failed for {hash}: {detail}")]
    Integrity { hash: String, detail: String },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("run {0} is not complete")]
    Incomplete(String),
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// The run settings as recorded, including the model in use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub model: String,
    pub temperature: f64,
}

impl StoredConfig {
    pub fn new(run: RunConfig, model: &ModelInfo) -> Self {
        Self {
            run,
            model: model.model.clone(),
            temperature: model.temperature,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessStatus {
    Pending,
    Active,
    Ratified,
    Cached,
    Rejected,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessEntry {
    pub process: VertexId,
    pub status: ProcessStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<usize>,
    /// Hash of the ratified program.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub process: VertexId,
    pub exempt: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub v: u32,
    pub run_id: String,
    pub config: StoredConfig,
    pub dfd_hash: String,
    pub ordering: Vec<VertexId>,
    pub processes: Vec<ProcessEntry>,
    pub sessions: Vec<SessionEntry>,
    pub interactions: usize,
    pub machine_calls: usize,
    pub counting_rule: String,
    #[serde(flatten)]
    pub status: RunStatus,
    pub phase: RunPhase,
    /// Hash of the assembled program, or `"empty"` after a failed run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assembled: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

impl Manifest {
    /// Snapshot of `state`. Only the timestamps and phase come from outside.
    pub fn describe(
        state: &RunState,
        config: &StoredConfig,
        dfd_hash: &str,
        phase: RunPhase,
        created_at: Timestamp,
        updated_at: Timestamp,
    ) -> Self {
        let processes = state
            .ordering
            .iter()
            .map(|p| {
                let session = state.session_for(p).map(|(k, _)| k);
                let program = state.programs.get(p).and_then(ProgramText::content_hash);
                let status = if state.cache_hits.contains(p) {
                    ProcessStatus::Cached
                } else {
                    match state.session_for(p).map(|(_, s)| &s.outcome) {
                        None => ProcessStatus::Pending,
                        Some(None) => ProcessStatus::Active,
                        Some(Some(Outcome::Ratified(_))) => ProcessStatus::Ratified,
                        Some(Some(Outcome::Rejected)) => ProcessStatus::Rejected,
                        Some(Some(Outcome::Exhausted)) => ProcessStatus::Exhausted,
                    }
                };
                ProcessEntry {
                    process: p.clone(),
                    status,
                    session,
                    program,
                }
            })
            .collect();
        let sessions = state
            .sessions
            .iter()
            .map(|s| SessionEntry {
                process: s.process_id.clone(),
                exempt: s.exempt,
                outcome: s.outcome.as_ref().map(|o| o.as_str().to_string()),
            })
            .collect();
        Manifest {
            v: MANIFEST_VERSION,
            run_id: state.run_id.clone(),
            config: config.clone(),
            dfd_hash: dfd_hash.to_string(),
            ordering: state.ordering.clone(),
            processes,
            sessions,
            interactions: state.interactions(),
            machine_calls: state.machine_calls(),
            counting_rule: COUNTING_RULE.to_string(),
            status: state.status.clone(),
            phase,
            assembled: state
                .assembled
                .as_ref()
                .map(|p| p.content_hash().unwrap_or_else(|| EMPTY.to_string())),
            warnings: state.warnings.clone(),
            created_at,
            updated_at,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.status != RunStatus::Running
    }
}

/// Everything stored for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub manifest: Manifest,
    pub background: Background,
    pub sessions: Vec<Session>,
    /// Hash to text.
    pub programs: BTreeMap<String, String>,
    pub context: Option<Context>,
    pub llm_log: Vec<LlmLogEntry>,
    pub metrics: Option<MetricSet>,
}

impl RunRecord {
    pub fn run_id(&self) -> &str {
        &self.manifest.run_id
    }

    pub fn program(&self, hash: &str) -> Option<ProgramText> {
        self.programs.get(hash).map(ProgramText::new)
    }

    pub fn assembled(&self) -> Option<ProgramText> {
        match self.manifest.assembled.as_deref()? {
            EMPTY => Some(ProgramText::Empty),
            hash => self.program(hash),
        }
    }

    pub fn program_for(&self, process: &VertexId) -> Option<ProgramText> {
        let entry = self.manifest.processes.iter().find(|e| &e.process == process)?;
        self.program(entry.program.as_deref()?)
    }

    /// Finished without being aborted: replayable and measurable.
    pub fn is_complete(&self) -> bool {
        matches!(self.manifest.status, RunStatus::Done | RunStatus::Failed)
    }
}

/// A directory holding `runs/<id>/...`. Cheap to clone.
#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let runs = root.join("runs");
        fs::create_dir_all(&runs).map_err(io_err(&runs))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    pub fn exists(&self, run_id: &str) -> bool {
        self.run_dir(run_id).join("manifest.json").is_file()
    }

    /// Ids of every run with a manifest, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let runs = self.root.join("runs");
        let mut ids = Vec::new();
        for entry in fs::read_dir(&runs).map_err(io_err(&runs))? {
            let entry = entry.map_err(io_err(&runs))?;
            if let Some(id) = entry.file_name().to_str() {
                if self.exists(id) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Atomically replace `runs/<id>/<name>`.
    pub fn write_file(&self, run_id: &str, name: &str, contents: &[u8]) -> Result<(), StoreError> {
        write_atomic(&self.run_dir(run_id).join(name), contents)
    }

    pub fn read_file(&self, run_id: &str, name: &str) -> Result<Option<String>, StoreError> {
        let path = self.run_dir(run_id).join(name);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn read_manifest(&self, run_id: &str) -> Result<Manifest, StoreError> {
        let path = self.run_dir(run_id).join("manifest.json");
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(run_id.into())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        parse_json(&path, &text)
    }

    /// Raw JSONL transcript of session `k`.
    pub fn read_session_text(&self, run_id: &str, k: usize) -> Result<Option<String>, StoreError> {
        self.read_file(run_id, &format!("sessions/{k}.jsonl"))
    }

    /// Store `program` under its hash; returns the hash, `None` for the empty program.
    pub fn put_program(&self, run_id: &str, program: &ProgramText) -> Result<Option<String>, StoreError> {
        let (Some(text), Some(hash)) = (program.as_str(), program.content_hash()) else {
            return Ok(None);
        };
        let path = self.run_dir(run_id).join("programs").join(&hash);
        if !path.exists() {
            write_atomic(&path, text.as_bytes())?;
        }
        Ok(Some(hash))
    }

    /// Write a whole record. Loading it back yields an equal record.
    pub fn save(&self, record: &RunRecord) -> Result<(), StoreError> {
        let id = record.run_id();
        let dir = self.run_dir(id);
        for sub in ["sessions", "programs"] {
            fs::create_dir_all(dir.join(sub)).map_err(io_err(&dir))?;
        }
        self.write_file(id, "dfd.json", record.background.to_json().as_bytes())?;
        for text in record.programs.values() {
            self.put_program(id, &ProgramText::new(text.clone()))?;
        }
        for (k, s) in record.sessions.iter().enumerate() {
            self.write_file(id, &format!("sessions/{k}.jsonl"), encode_session(s).as_bytes())?;
        }
        if let Some(c) = &record.context {
            self.write_file(id, "context.json", &to_json(c))?;
        }
        let mut log = Vec::new();
        for e in &record.llm_log {
            log.extend(serde_json::to_vec(e).expect("log entry serializes"));
            log.push(b'\n');
        }
        self.write_file(id, "llm.jsonl", &log)?;
        if let Some(m) = &record.metrics {
            self.write_file(id, "metrics.json", &to_json(m))?;
        }
        self.write_file(id, "manifest.json", &to_json(&record.manifest))
    }

    /// Persist a finished (or interrupted) run state in one go.
    pub fn persist(
        &self,
        state: &RunState,
        background: &Background,
        config: &StoredConfig,
        llm_log: &[LlmLogEntry],
        at: Timestamp,
    ) -> Result<RunRecord, StoreError> {
        let mut programs = BTreeMap::new();
        let mut keep = |p: &ProgramText| {
            if let (Some(h), Some(t)) = (p.content_hash(), p.as_str()) {
                programs.insert(h, t.to_string());
            }
        };
        for s in &state.sessions {
            for m in &s.messages {
                if let Some(p) = &m.program {
                    keep(p);
                }
            }
        }
        state.programs.values().for_each(&mut keep);
        if let Some(p) = &state.assembled {
            keep(p);
        }
        let phase = match &state.status {
            RunStatus::Running => RunPhase::Validating,
            RunStatus::Done => RunPhase::Done { outcome: "done".into() },
            RunStatus::Failed => RunPhase::Done {
                outcome: "failed".into(),
            },
            RunStatus::Aborted(reason) => RunPhase::Aborted { reason: reason.clone() },
        };
        let manifest = Manifest::describe(state, config, &background.content_hash(), phase, at, at);
        let mut record = RunRecord {
            manifest,
            background: background.clone(),
            sessions: state.sessions.clone(),
            programs,
            context: Some(state.context.clone()),
            llm_log: llm_log.to_vec(),
            metrics: None,
        };
        record.metrics = Some(metrics(&record));
        self.save(&record)?;
        Ok(record)
    }

    /// Read a run back, checking every content hash.
    pub fn load(&self, run_id: &str) -> Result<RunRecord, StoreError> {
        let manifest = self.read_manifest(run_id)?;
        let dir = self.run_dir(run_id);

        let dfd_path = dir.join("dfd.json");
        let dfd_text = fs::read_to_string(&dfd_path).map_err(io_err(&dfd_path))?;
        let background = parse_background(&dfd_text).map_err(|e| StoreError::Corrupt {
            path: dfd_path.clone(),
            message: e.to_string(),
        })?;
        if background.content_hash() != manifest.dfd_hash {
            return Err(StoreError::Integrity {
                hash: manifest.dfd_hash.clone(),
                detail: "dfd.json does not match the manifest".into(),
            });
        }

        let mut programs = BTreeMap::new();
        let program_dir = dir.join("programs");
        if program_dir.is_dir() {
            for entry in fs::read_dir(&program_dir).map_err(io_err(&program_dir))? {
                let path = entry.map_err(io_err(&program_dir))?.path();
                let Some(name) = path.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
                    continue;
                };
                if name.starts_with('.') {
                    continue;
                }
                let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                if sha256_hex(&text) != name {
                    return Err(StoreError::Integrity {
                        hash: name,
                        detail: "program text does not match its hash".into(),
                    });
                }
                programs.insert(name, text);
            }
        }

        let limits = manifest.config.run.limits;
        let mut sessions = Vec::with_capacity(manifest.sessions.len());
        for (k, entry) in manifest.sessions.iter().enumerate() {
            let path = dir.join(format!("sessions/{k}.jsonl"));
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
                Err(e) => return Err(io_err(&path)(e)),
            };
            let session = decode_session(&entry.process, limits, entry.exempt, &text, |h| {
                programs.get(h).cloned()
            })
            .map_err(|e| match e {
                TranscriptError::MissingProgram { hash, line } => StoreError::Integrity {
                    hash,
                    detail: format!("referenced by sessions/{k}.jsonl line {line} but not stored"),
                },
                other => StoreError::Corrupt {
                    path: path.clone(),
                    message: other.to_string(),
                },
            })?;
            sessions.push(session);
        }

        let needed = manifest
            .processes
            .iter()
            .filter_map(|p| p.program.as_ref())
            .chain(manifest.assembled.iter().filter(|h| h.as_str() != EMPTY));
        for hash in needed {
            if !programs.contains_key(hash) {
                return Err(StoreError::Integrity {
                    hash: hash.clone(),
                    detail: "named in the manifest but not stored".into(),
                });
            }
        }

        let (llm_log, _) = read_llm_log(&dir.join("llm.jsonl"))?;
        let context = match self.read_file(run_id, "context.json")? {
            Some(t) => Some(parse_json(&dir.join("context.json"), &t)?),
            None => None,
        };
        let metrics = match self.read_file(run_id, "metrics.json")? {
            Some(t) => Some(parse_json(&dir.join("metrics.json"), &t)?),
            None => None,
        };
        let record = RunRecord {
            manifest,
            background,
            sessions,
            programs,
            context,
            llm_log,
            metrics,
        };
        check_assembly(&record)?;
        Ok(record)
    }
}

/// The stored assembled program must be the assembly of the stored
/// per-process programs.
fn check_assembly(record: &RunRecord) -> Result<(), StoreError> {
    let m = &record.manifest;
    if m.config.run.mode != Mode::Structured || m.status != RunStatus::Done {
        return Ok(());
    }
    let Some(hash) = &m.assembled else {
        return Ok(());
    };
    let programs: Vec<ProgramText> = m
        .ordering
        .iter()
        .map(|p| record.program_for(p).unwrap_or(ProgramText::Empty))
        .collect();
    let rebuilt = assemble(&programs, &m.ordering).map_err(|e| StoreError::Integrity {
        hash: hash.clone(),
        detail: e.to_string(),
    })?;
    if rebuilt.content_hash().as_ref() != Some(hash) {
        return Err(StoreError::Integrity {
            hash: hash.clone(),
            detail: "assembled program differs from the assembly of the per-process programs".into(),
        });
    }
    Ok(())
}

/// Parse `llm.jsonl`, dropping a torn final line. Returns the entries and
/// the byte length of the intact prefix.
pub(crate) fn read_llm_log(path: &Path) -> Result<(Vec<LlmLogEntry>, u64), StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut entries = Vec::new();
    let mut good = 0usize;
    let mut line_no = 0;
    while good < bytes.len() {
        line_no += 1;
        let Some(end) = bytes[good..].iter().position(|b| *b == b'\n') else {
            tracing::warn!("{}: dropping torn final line {line_no}", path.display());
            break;
        };
        let line = &bytes[good..good + end];
        match serde_json::from_slice::<LlmLogEntry>(line) {
            Ok(e) => entries.push(e),
            Err(e) => {
                return Err(StoreError::Corrupt {
                    path: path.to_path_buf(),
                    message: format!("line {line_no}: {e}"),
                })
            }
        }
        good += end + 1;
    }
    Ok((entries, good as u64))
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("record serializes");
    v.push(b'\n');
    v
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, StoreError> {
    serde_json::from_str(text).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Write to a sibling temp file, flush it to disk, rename over `path`.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("run files live in a directory");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_data().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}
