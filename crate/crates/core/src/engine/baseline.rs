//! The unstructured comparison modes: one shot (`llm-0`) and budgeted
//! free-form feedback (`llm-k`). Neither uses the DFD.

use chrono::DateTime;

use super::interact::machine_judgment;
use super::{Engine, EngineError, Mode, RunConfig, RunPhase, RunState, RunStatus};
use crate::agent::{check_evaluation, EvalRequest};
use crate::context::{Context, Origin};
use crate::dfd::{Background, ProcessSpec, VertexId};
use crate::llm::{Purpose, Role};
use crate::protocol::{Message, Outcome, ProgramText, Sender, Session, Tag};

/// Process id under which baseline sessions are recorded.
pub fn baseline_process(mode: Mode) -> VertexId {
    VertexId::new(mode.name())
}

impl Engine<'_> {
    /// Ask for the whole program from the task description alone. The
    /// assembled program is whatever the last proposal held.
    pub fn run_baseline(&mut self, background: &Background, config: &RunConfig) -> Result<RunState, EngineError> {
        config.validate()?;
        let budget = match config.mode {
            Mode::Llm0 => 1,
            Mode::LlmK { budget } => budget,
            Mode::Structured => {
                return Err(EngineError::InvalidConfig(
                    "run_baseline needs llm-0 or llm-k mode".into(),
                ))
            }
        };
        let task = background.task_description.trim();
        if task.is_empty() {
            return Err(EngineError::InvalidConfig("empty task description".into()));
        }
        let free_form = config.mode != Mode::Llm0;
        let process = baseline_process(config.mode);
        let mut context = Context::default();
        let id = context.push(Origin::Task, Role::User, task);
        context.set_pinned(id, true);
        let mut state = RunState::new(self.run_id.clone(), config.mode, vec![process.clone()], context);
        let mut session = Session::new(process.clone(), config.limits);
        session.exempt = free_form;
        state.sessions.push(session);
        self.phase(&state, RunPhase::Validating)?;

        let spec = ProcessSpec::new(task, "none", "a program that solves the whole task");
        self.append(&mut state, 0, Message::init(1, spec, DateTime::UNIX_EPOCH))?;
        let mut last_program = ProgramText::Empty;
        let mut outcome = Outcome::Exhausted;
        for call in 1..=budget {
            if let Some(b) = config.context_budget {
                self.fit(&mut state, b)?;
            }
            self.phase(
                &state,
                RunPhase::CallingModel {
                    process: process.clone(),
                    attempt: 1,
                    exchange: call,
                },
            )?;
            let previous = state.sessions[0].last_machine().map(|m| {
                (
                    m.program.clone().unwrap_or(ProgramText::Empty),
                    m.explanation.clone().unwrap_or_default(),
                )
            });
            let reply = match self.ask(
                &state,
                Purpose::Baseline { call },
                previous.as_ref().map(|(p, e)| (p, e.as_str())),
            )? {
                Ok(r) => r,
                Err(e) => {
                    self.warn(&mut state, format!("{process}: call {call} failed: {e}"))?;
                    break;
                }
            };
            self.append(
                &mut state,
                0,
                Message {
                    attempt: 1,
                    index: 2 * call - 1,
                    sender: Sender::Machine,
                    tag: reply.tag,
                    spec: None,
                    program: Some(reply.program.clone()),
                    explanation: Some(reply.explanation.clone()),
                    judgment: Some(machine_judgment(reply.tag)),
                    synthetic: false,
                    timestamp: DateTime::UNIX_EPOCH,
                },
            )?;
            state.context.push_assistant(reply.raw.clone());
            last_program = reply.program.clone();
            if !free_form {
                break;
            }

            self.phase(
                &state,
                RunPhase::AwaitingHuman {
                    process: process.clone(),
                    session: 0,
                    attempt: 1,
                    exchange: call,
                },
            )?;
            let evaluated = self.human.evaluate(&EvalRequest {
                session: &state.sessions[0],
                spec: None,
                program: &reply.program,
                explanation: &reply.explanation,
                attempt: 1,
                exchange: call,
                limits: config.limits,
                free_form: true,
            });
            let eval = match evaluated {
                Ok(e) => e,
                Err(error) => {
                    let process = process.clone();
                    return Err(self.abort(&mut state, EngineError::Agent { process, error }));
                }
            };
            if let Err(error) = check_evaluation(&eval, call, config.limits, true) {
                let process = process.clone();
                let session = Box::new(state.sessions[0].clone());
                return Err(self.abort(
                    &mut state,
                    EngineError::Protocol {
                        process,
                        error,
                        session,
                    },
                ));
            }
            let text = eval.refutation.clone().unwrap_or_default();
            self.append(
                &mut state,
                0,
                Message {
                    attempt: 1,
                    index: 2 * call,
                    sender: Sender::Human,
                    tag: eval.tag,
                    spec: None,
                    program: Some(reply.program.clone()),
                    explanation: Some(text.clone()),
                    judgment: Some(eval.judgment),
                    synthetic: false,
                    timestamp: DateTime::UNIX_EPOCH,
                },
            )?;
            self.human.committed();
            match eval.tag {
                Tag::Ratify => {
                    outcome = Outcome::Ratified(reply.program.clone());
                    break;
                }
                Tag::Reject => {
                    outcome = Outcome::Rejected;
                    last_program = ProgramText::Empty;
                    break;
                }
                _ => {
                    state.context.push_user(text);
                }
            }
        }

        self.close_session(&mut state, 0, outcome)?;
        state.status = if last_program.is_empty() {
            RunStatus::Failed
        } else {
            RunStatus::Done
        };
        state.assembled = Some(last_program);
        let word = if state.status == RunStatus::Done {
            "done"
        } else {
            "failed"
        };
        self.phase(&state, RunPhase::Done { outcome: word.into() })?;
        Ok(state)
    }
}
