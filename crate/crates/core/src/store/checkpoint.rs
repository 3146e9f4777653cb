use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::sync::Arc;

use super::{io_err, metrics_for, read_llm_log, to_json, Manifest, RunRecord, Store, StoreError, StoredConfig};
use crate::clock::{Clock, Timestamp};
use crate::context::Context;
use crate::dfd::Background;
use crate::engine::{Event, Observer, RunPhase, RunState, RunStatus};
use crate::protocol::encode_session;

/// Observer that writes the run directory as the engine goes: after every
/// message the session file, manifest and context are current.
///
/// A resumed run is re-executed from the start. Until it has caught up
/// with what is already on disk nothing is rewritten, so a crash during
/// resumption loses nothing.
pub struct Checkpointer {
    store: Store,
    run_id: String,
    config: StoredConfig,
    dfd_hash: String,
    clock: Arc<dyn Clock>,
    created_at: Timestamp,
    phase: RunPhase,
    log: File,
    logged: usize,
    seen: usize,
    recorded: Vec<usize>,
    caught_up: bool,
}

impl Checkpointer {
    /// Start a new run directory.
    pub fn create(
        store: &Store,
        run_id: &str,
        background: &Background,
        config: StoredConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StoreError> {
        if store.exists(run_id) {
            return Err(StoreError::Exists(run_id.into()));
        }
        let dir = store.run_dir(run_id);
        for sub in ["sessions", "programs"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(io_err(&d))?;
        }
        store.write_file(run_id, "dfd.json", background.to_json().as_bytes())?;
        let log_path = dir.join("llm.jsonl");
        let log = File::create(&log_path).map_err(io_err(&log_path))?;
        let created_at = clock.now();
        let mut c = Self {
            store: store.clone(),
            run_id: run_id.into(),
            config,
            dfd_hash: background.content_hash(),
            clock,
            created_at,
            phase: RunPhase::Validating,
            log,
            logged: 0,
            seen: 0,
            recorded: Vec::new(),
            caught_up: true,
        };
        let empty = RunState::new(run_id, c.config.run.mode, Vec::new(), Context::default());
        c.write_manifest(&empty)?;
        Ok(c)
    }

    /// Continue writing the run in `record`, which was loaded from `store`.
    pub fn resume(store: &Store, record: &RunRecord, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        let run_id = record.run_id();
        let log_path = store.run_dir(run_id).join("llm.jsonl");
        let (entries, intact) = read_llm_log(&log_path)?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        log.set_len(intact).map_err(io_err(&log_path))?;
        let recorded: Vec<usize> = record.sessions.iter().map(|s| s.messages.len()).collect();
        Ok(Self {
            store: store.clone(),
            run_id: run_id.into(),
            config: record.manifest.config.clone(),
            dfd_hash: record.manifest.dfd_hash.clone(),
            clock,
            created_at: record.manifest.created_at,
            phase: record.manifest.phase.clone(),
            log,
            logged: entries.len(),
            seen: 0,
            caught_up: recorded.is_empty(),
            recorded,
        })
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    fn write_manifest(&mut self, state: &RunState) -> Result<(), StoreError> {
        let manifest = Manifest::describe(
            state,
            &self.config,
            &self.dfd_hash,
            self.phase.clone(),
            self.created_at,
            self.clock.now(),
        );
        self.store
            .write_file(&self.run_id, "manifest.json", &to_json(&manifest))
    }

    fn check_caught_up(&mut self, state: &RunState) {
        if !self.caught_up {
            self.caught_up = self
                .recorded
                .iter()
                .enumerate()
                .all(|(k, n)| state.sessions.get(k).is_some_and(|s| s.messages.len() >= *n));
        }
    }

    fn handle(&mut self, state: &RunState, event: &Event<'_>) -> Result<(), StoreError> {
        if let Event::Llm(entry) = event {
            self.seen += 1;
            if self.seen > self.logged {
                let mut line = serde_json::to_vec(entry).expect("log entry serializes");
                line.push(b'\n');
                let path = self.store.run_dir(&self.run_id).join("llm.jsonl");
                self.log.write_all(&line).map_err(io_err(&path))?;
                self.log.sync_data().map_err(io_err(&path))?;
                self.logged += 1;
            }
            return Ok(());
        }
        if let Event::Phase(p) = event {
            self.phase = (*p).clone();
        }
        self.check_caught_up(state);
        if !self.caught_up {
            // Includes aborts: a resumption that diverges leaves the record as it was.
            return Ok(());
        }
        match event {
            Event::Message { session, index } => {
                let s = &state.sessions[*session];
                if let Some(p) = &s.messages[*index].program {
                    self.store.put_program(&self.run_id, p)?;
                }
                self.store.write_file(
                    &self.run_id,
                    &format!("sessions/{session}.jsonl"),
                    encode_session(s).as_bytes(),
                )?;
                self.store
                    .write_file(&self.run_id, "context.json", &to_json(&state.context))?;
            }
            Event::ProcessFinished { process, .. } => {
                if let Some(p) = state.programs.get(*process) {
                    self.store.put_program(&self.run_id, p)?;
                }
            }
            Event::Phase(RunPhase::Done { .. } | RunPhase::Aborted { .. }) => {
                for p in state.programs.values().chain(state.assembled.iter()) {
                    self.store.put_program(&self.run_id, p)?;
                }
                for (k, s) in state.sessions.iter().enumerate() {
                    self.store.write_file(
                        &self.run_id,
                        &format!("sessions/{k}.jsonl"),
                        encode_session(s).as_bytes(),
                    )?;
                }
                self.store
                    .write_file(&self.run_id, "context.json", &to_json(&state.context))?;
                let complete = matches!(state.status, RunStatus::Done | RunStatus::Failed);
                let m = metrics_for(&state.sessions, state.assembled.as_ref(), complete);
                self.store.write_file(&self.run_id, "metrics.json", &to_json(&m))?;
            }
            _ => {}
        }
        self.write_manifest(state)
    }
}

impl Observer for Checkpointer {
    fn observe(&mut self, state: &RunState, event: &Event<'_>) -> Result<(), String> {
        self.handle(state, event).map_err(|e| e.to_string())
    }
}

/// Two observers in sequence; the first error wins.
pub struct Tee<'a>(pub &'a mut dyn Observer, pub &'a mut dyn Observer);

impl Observer for Tee<'_> {
    fn observe(&mut self, state: &RunState, event: &Event<'_>) -> Result<(), String> {
        self.0.observe(state, event)?;
        self.1.observe(state, event)
    }
}
