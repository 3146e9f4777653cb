//! One process: up to R attempts of up to n exchanges each.

use chrono::DateTime;

use super::{Divergence, Engine, EngineError, Event, RunConfig, RunPhase, RunState, RunStatus};
use crate::agent::{check_evaluation, EvalRequest, Evaluation};
use crate::context::{Context, Origin};
use crate::dfd::{ProcessSpec, VertexId};
use crate::llm::{
    build_initial_prompt, render_decision, render_refutation, ChatRequest, LlmError, LlmLogEntry, MachineReply,
    Purpose, Role,
};
use crate::protocol::{Judgment, Message, Outcome, ProgramText, Sender, Session, Tag};

/// Text of the refutation the engine sends when a reply holds no program.
pub const NO_PROGRAM: &str = "no program found";

fn describe(m: &Message) -> String {
    let program = match &m.program {
        None => "?".to_string(),
        Some(ProgramText::Empty) => "empty".to_string(),
        Some(p) => crate::hash::short_ref(&p.content_hash().unwrap_or_default()),
    };
    format!("{} {} program {}", m.sender, m.tag, program)
}

pub(super) fn machine_judgment(tag: Tag) -> Judgment {
    match tag {
        Tag::Revise => Judgment::new(false, true),
        _ => Judgment::new(false, false),
    }
}

impl Engine<'_> {
    pub(super) fn emit(&mut self, state: &RunState, event: Event<'_>) -> Result<(), EngineError> {
        match &mut self.observer {
            Some(o) => o.observe(state, &event).map_err(EngineError::Checkpoint),
            None => Ok(()),
        }
    }

    pub(super) fn phase(&mut self, state: &RunState, phase: RunPhase) -> Result<(), EngineError> {
        self.emit(state, Event::Phase(&phase))
    }

    pub(super) fn warn(&mut self, state: &mut RunState, text: String) -> Result<(), EngineError> {
        tracing::warn!("{text}");
        state.warnings.push(text.clone());
        self.emit(state, Event::Warning(&text))
    }

    /// Mark the run aborted, tell the observer, hand back the error.
    pub(super) fn abort(&mut self, state: &mut RunState, error: EngineError) -> EngineError {
        let reason = error.to_string();
        state.status = RunStatus::Aborted(reason.clone());
        if let Err(e) = self.phase(state, RunPhase::Aborted { reason }) {
            tracing::error!("could not record abort: {e}");
        }
        error
    }

    /// Append to session `k`, checking it against the expected transcript.
    pub(super) fn append(&mut self, state: &mut RunState, k: usize, mut message: Message) -> Result<(), EngineError> {
        let position = state.sessions[k].messages.len();
        match self.expected.get(k).and_then(|s| s.messages.get(position)) {
            Some(expected) => {
                message.timestamp = expected.timestamp;
                let same_session = self.expected[k].process_id == state.sessions[k].process_id;
                if !same_session || !expected.same_content(&message) {
                    let divergence = Divergence {
                        session: k,
                        process: state.sessions[k].process_id.clone(),
                        attempt: message.attempt,
                        index: message.index,
                        expected: describe(expected),
                        actual: describe(&message),
                    };
                    return Err(self.abort(state, EngineError::Divergence(Box::new(divergence))));
                }
            }
            None => message.timestamp = self.clock.now(),
        }
        state.sessions[k].messages.push(message);
        self.emit(
            state,
            Event::Message {
                session: k,
                index: position,
            },
        )
    }

    /// One model request over the current context, logged whatever happens.
    pub(super) fn ask(
        &mut self,
        state: &RunState,
        purpose: Purpose,
        previous: Option<(&ProgramText, &str)>,
    ) -> Result<Result<MachineReply, LlmError>, EngineError> {
        let request = ChatRequest {
            messages: state.context.render(),
            purpose,
        };
        let info = self.llm.info();
        let result = self.llm.complete(&request);
        let entry = LlmLogEntry::new(&request, &info, result.as_deref(), self.clock.now());
        self.emit(state, Event::Llm(&entry))?;
        Ok(result.map(|raw| MachineReply::from_completion(raw, previous, request.hash())))
    }

    /// Summarize until the context fits `budget`; failures only warn.
    pub(super) fn fit(&mut self, state: &mut RunState, budget: usize) -> Result<(), EngineError> {
        if state.context.tokens(self.estimator.as_ref()) <= budget {
            return Ok(());
        }
        self.phase(state, RunPhase::Summarizing)?;
        let mut entries = Vec::new();
        let info = self.llm.info();
        let clock = self.clock.clone();
        let result = super::summarize_context(
            &mut *self.llm,
            &state.context,
            budget,
            self.estimator.as_ref(),
            &mut |request, result| entries.push(LlmLogEntry::new(request, &info, result, clock.now())),
        );
        for entry in &entries {
            self.emit(state, Event::Llm(entry))?;
        }
        state.context = result.context;
        if let Some(w) = result.warning {
            self.warn(state, w)?;
        }
        Ok(())
    }

    fn last_reply(session: &Session) -> Option<(ProgramText, String)> {
        session.last_machine().map(|m| {
            (
                m.program.clone().unwrap_or(ProgramText::Empty),
                m.explanation.clone().unwrap_or_default(),
            )
        })
    }

    pub(super) fn close_session(
        &mut self,
        state: &mut RunState,
        k: usize,
        outcome: Outcome,
    ) -> Result<(), EngineError> {
        let session = &state.sessions[k];
        let last = session.messages.last();
        let attempt = last.map_or(1, |m| m.attempt);
        let index = last.map_or(0, |m| m.index + 1);
        let program = match &outcome {
            Outcome::Ratified(p) => p.clone(),
            _ => ProgramText::Empty,
        };
        let term = Message {
            attempt,
            index,
            sender: Sender::Engine,
            tag: Tag::Term,
            spec: None,
            program: Some(program),
            explanation: Some(outcome.as_str().to_string()),
            judgment: None,
            synthetic: true,
            timestamp: DateTime::UNIX_EPOCH,
        };
        state.sessions[k].outcome = Some(outcome);
        self.append(state, k, term)
    }

    /// Algorithm-2 loop for `process`, appending a new session to `state`.
    pub(super) fn interact_in(
        &mut self,
        state: &mut RunState,
        process: &VertexId,
        spec: &ProcessSpec,
        task_description: &str,
        config: &RunConfig,
    ) -> Result<ProgramText, EngineError> {
        let limits = config.limits;
        let k = state.sessions.len();
        state.sessions.push(Session::new(process.clone(), limits));
        self.emit(state, Event::ProcessStarted { process })?;
        let prompt = build_initial_prompt(task_description, spec);
        let mut calls = 0;
        let mut outcome = Outcome::Exhausted;

        'attempts: for attempt in 1..=limits.retries {
            self.append(state, k, Message::init(attempt, spec.clone(), DateTime::UNIX_EPOCH))?;
            let id = state.context.push(
                Origin::Init {
                    process: process.clone(),
                },
                Role::User,
                prompt.clone(),
            );
            state.context.pin_init(id);

            for exchange in 1..=limits.messages {
                if let Some(budget) = config.context_budget {
                    self.fit(state, budget)?;
                }
                calls += 1;
                self.phase(
                    state,
                    RunPhase::CallingModel {
                        process: process.clone(),
                        attempt,
                        exchange,
                    },
                )?;
                let previous = Self::last_reply(&state.sessions[k]);
                let purpose = Purpose::Program {
                    process: process.clone(),
                    attempt,
                    exchange,
                    call: calls,
                };
                let reply = match self.ask(state, purpose, previous.as_ref().map(|(p, e)| (p, e.as_str())))? {
                    Ok(r) => r,
                    Err(LlmError::Oversize(detail)) => {
                        self.warn(
                            state,
                            format!("{process}: attempt {attempt} hit the model context limit: {detail}"),
                        )?;
                        let budget = config
                            .context_budget
                            .unwrap_or_else(|| state.context.tokens(self.estimator.as_ref()) / 2)
                            .max(1);
                        self.fit(state, budget)?;
                        continue 'attempts;
                    }
                    Err(e) => {
                        self.warn(state, format!("{process}: attempt {attempt} abandoned: {e}"))?;
                        continue 'attempts;
                    }
                };

                self.append(
                    state,
                    k,
                    Message {
                        attempt,
                        index: 2 * exchange - 1,
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
                state.context.push(
                    Origin::Machine {
                        process: process.clone(),
                    },
                    Role::Assistant,
                    reply.raw.clone(),
                );

                let human = |tag: Tag, text: String, judgment: Judgment, synthetic: bool| Message {
                    attempt,
                    index: 2 * exchange,
                    sender: Sender::Human,
                    tag,
                    spec: None,
                    program: Some(reply.program.clone()),
                    explanation: Some(text),
                    judgment: Some(judgment),
                    synthetic,
                    timestamp: DateTime::UNIX_EPOCH,
                };

                if reply.program.is_empty() {
                    let msg = human(Tag::Refute, NO_PROGRAM.into(), Judgment::new(false, true), true);
                    self.append(state, k, msg)?;
                    let turn = render_refutation(Tag::Refute, &ProgramText::Empty, NO_PROGRAM).expect("REFUTE renders");
                    state.context.push(
                        Origin::Human {
                            process: process.clone(),
                        },
                        Role::User,
                        turn,
                    );
                    continue 'attempts;
                }

                self.phase(
                    state,
                    RunPhase::AwaitingHuman {
                        process: process.clone(),
                        session: k,
                        attempt,
                        exchange,
                    },
                )?;
                let evaluated = self.human.evaluate(&EvalRequest {
                    session: &state.sessions[k],
                    spec: Some(spec),
                    program: &reply.program,
                    explanation: &reply.explanation,
                    attempt,
                    exchange,
                    limits,
                    free_form: false,
                });
                let eval = match evaluated {
                    Ok(e) => e,
                    Err(error) => {
                        let process = process.clone();
                        return Err(self.abort(state, EngineError::Agent { process, error }));
                    }
                };
                if let Err(error) = check_evaluation(&eval, exchange, limits, false) {
                    let process = process.clone();
                    let session = Box::new(state.sessions[k].clone());
                    return Err(self.abort(
                        state,
                        EngineError::Protocol {
                            process,
                            error,
                            session,
                        },
                    ));
                }
                let Evaluation {
                    tag,
                    refutation,
                    judgment,
                } = eval;
                let text = refutation.unwrap_or_default();
                self.append(state, k, human(tag, text.clone(), judgment, false))?;
                self.human.committed();

                let turn = match tag {
                    Tag::Refute => render_refutation(tag, &reply.program, &text).expect("REFUTE renders"),
                    _ => render_decision(tag, &reply.program, Some(&text)),
                };
                state.context.push(
                    Origin::Human {
                        process: process.clone(),
                    },
                    Role::User,
                    turn,
                );
                match tag {
                    Tag::Ratify => {
                        outcome = Outcome::Ratified(reply.program.clone());
                        break 'attempts;
                    }
                    Tag::Reject => {
                        outcome = Outcome::Rejected;
                        break 'attempts;
                    }
                    _ => {}
                }
            }
        }

        let program = match &outcome {
            Outcome::Ratified(p) => p.clone(),
            _ => ProgramText::Empty,
        };
        self.close_session(state, k, outcome)?;
        self.emit(
            state,
            Event::ProcessFinished {
                process,
                ratified: !program.is_empty(),
                cache_hit: false,
            },
        )?;
        Ok(program)
    }

    /// Build one process on its own: returns the program (empty unless
    /// ratified), the extended context and the session transcript.
    pub fn interact(
        &mut self,
        process: &VertexId,
        spec: &ProcessSpec,
        task_description: &str,
        context: Context,
        config: &RunConfig,
    ) -> Result<(ProgramText, Context, Session), EngineError> {
        config.validate()?;
        let mut state = RunState::new(self.run_id.clone(), config.mode, vec![process.clone()], context);
        let program = self.interact_in(&mut state, process, spec, task_description, config)?;
        let session = state.sessions.pop().expect("interact opened a session");
        Ok((program, state.context, session))
    }
}
