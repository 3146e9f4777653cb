//! Algorithm 1: every process in order, threading the context, stopping at
//! the first process that ends without a ratified program.

use super::{Engine, EngineError, Event, Mode, RunConfig, RunPhase, RunState, RunStatus};
use crate::context::{Context, Origin};
use crate::dfd::{check_ordering, process_ordering, validate_background, Background, VertexId};
use crate::protocol::ProgramText;

/// The comment line that opens each process's block in the assembled program.
pub fn process_header(process: &VertexId) -> String {
    format!("# --- process {process} ---")
}

/// Concatenate in order, each block preceded by its header line.
pub fn assemble(programs: &[ProgramText], ordering: &[VertexId]) -> Result<ProgramText, EngineError> {
    if programs.len() != ordering.len() {
        return Err(EngineError::Assembly(format!(
            "{} programs for {} processes",
            programs.len(),
            ordering.len()
        )));
    }
    let mut out = String::new();
    for (program, process) in programs.iter().zip(ordering) {
        let Some(text) = program.as_str() else {
            return Err(EngineError::Assembly(format!("process {process} has no program")));
        };
        out.push_str(&process_header(process));
        out.push('\n');
        out.push_str(text);
        if !text.ends_with('\n') {
            out.push('\n');
        }
    }
    Ok(ProgramText::new(out))
}

/// Keep only the final INIT, proposal and answer of `process`.
fn clean(context: &mut Context, process: &VertexId) {
    let mut last = [None, None, None];
    for item in context.items() {
        let slot = match &item.origin {
            Origin::Init { process: p } if p == process => 0,
            Origin::Machine { process: p } if p == process => 1,
            Origin::Human { process: p } if p == process => 2,
            _ => continue,
        };
        last[slot] = Some(item.id);
    }
    let drop: Vec<_> = context
        .items()
        .iter()
        .filter(|i| match &i.origin {
            Origin::Init { process: p } | Origin::Machine { process: p } | Origin::Human { process: p } => {
                p == process && !last.contains(&Some(i.id))
            }
            _ => false,
        })
        .map(|i| i.id)
        .collect();
    context.remove(&drop);
}

impl Engine<'_> {
    /// Construct the whole program for `background`.
    pub fn run(&mut self, background: &Background, config: &RunConfig) -> Result<RunState, EngineError> {
        config.validate()?;
        if config.mode != Mode::Structured {
            return Err(EngineError::InvalidConfig(format!(
                "{} is a baseline mode; use run_baseline",
                config.mode.name()
            )));
        }
        let report = validate_background(background);
        if !report.is_valid() {
            return Err(EngineError::InvalidBackground(report));
        }
        let dfd = &background.dfd;
        let ordering = match &config.ordering {
            Some(o) => {
                check_ordering(dfd, o)?;
                o.clone()
            }
            None => process_ordering(dfd)?,
        };
        let mut state = RunState::new(
            self.run_id.clone(),
            config.mode,
            ordering.clone(),
            Context::new(&background.task_description),
        );
        self.phase(&state, RunPhase::Validating)?;

        for process in &ordering {
            let spec = dfd.spec(process).expect("ordering names processes");
            let key = spec.content_hash();
            if config.caching {
                if let Some(program) = state.cache.get(&key).cloned() {
                    state.programs.insert(process.clone(), program);
                    state.cache_hits.push(process.clone());
                    self.emit(
                        &state,
                        Event::ProcessFinished {
                            process,
                            ratified: true,
                            cache_hit: true,
                        },
                    )?;
                    continue;
                }
            }
            if let Some(budget) = config.context_budget {
                self.fit(&mut state, budget)?;
            }
            let program = self.interact_in(&mut state, process, spec, &background.task_description, config)?;
            if config.clean_context {
                clean(&mut state.context, process);
            }
            if program.is_empty() {
                state.assembled = Some(ProgramText::Empty);
                state.status = RunStatus::Failed;
                self.phase(
                    &state,
                    RunPhase::Done {
                        outcome: "failed".into(),
                    },
                )?;
                return Ok(state);
            }
            state.cache.insert(key, program.clone());
            state.programs.insert(process.clone(), program);
        }

        let programs: Vec<ProgramText> = ordering.iter().map(|p| state.programs[p].clone()).collect();
        state.assembled = Some(assemble(&programs, &ordering)?);
        state.status = RunStatus::Done;
        self.phase(&state, RunPhase::Done { outcome: "done".into() })?;
        Ok(state)
    }
}
