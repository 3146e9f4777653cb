//! Line-oriented terminal evaluator.
//!
//! Commands: `r` ratify, `f <text>` refute the program, `e <text>` refute the
//! explanation only, `x [note]` reject (offered only past the REJECT gate).
//! A bare `f` or `e` asks for the text on the next line.

use std::io::{BufRead, Write};

use super::{check_evaluation, AgentError, EvalRequest, Evaluation, HumanAgent};
use crate::protocol::Tag;

pub struct ConsoleHuman<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead + Send, W: Write + Send> ConsoleHuman<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self { input, output }
    }

    pub fn into_output(self) -> W {
        self.output
    }

    fn read_line(&mut self) -> Result<Option<String>, AgentError> {
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) => Ok(None),
            Ok(_) => Ok(Some(line.trim_end_matches(['\n', '\r']).to_string())),
            Err(e) => Err(AgentError::Io(e.to_string())),
        }
    }

    fn say(&mut self, text: &str) -> Result<(), AgentError> {
        writeln!(self.output, "{text}").map_err(|e| AgentError::Io(e.to_string()))
    }

    fn show(&mut self, request: &EvalRequest<'_>) -> Result<(), AgentError> {
        let mut text = format!(
            "=== {} attempt {} exchange {} (m = {}) ===\n",
            request.session.process_id, request.attempt, request.exchange, request.limits.reject_after
        );
        if let Some(spec) = request.spec {
            text.push_str(&format!(
                "Description: {}\nPre-condition: {}\nPost-condition: {}\n",
                spec.description, spec.pre, spec.post
            ));
        }
        text.push_str(&format!(
            "--- program ---\n{}\n--- explanation ---\n{}\n",
            request.program, request.explanation
        ));
        let mut options = String::from("[r]atify  re[f]ute <text>  [e]xplanation-only refute <text>");
        if request.reject_allowed() {
            options.push_str("  reje[x]t");
        }
        text.push_str(&options);
        self.say(&text)
    }

    fn text_or_prompt(&mut self, rest: &str) -> Result<Option<String>, AgentError> {
        if !rest.trim().is_empty() {
            return Ok(Some(rest.trim().to_string()));
        }
        self.say("refutation:")?;
        Ok(self.read_line()?.filter(|t| !t.trim().is_empty()))
    }
}

impl<R: BufRead + Send, W: Write + Send> HumanAgent for ConsoleHuman<R, W> {
    fn evaluate(&mut self, request: &EvalRequest<'_>) -> Result<Evaluation, AgentError> {
        self.show(request)?;
        loop {
            let Some(line) = self.read_line()? else {
                return if request.reject_allowed() {
                    Ok(Evaluation::reject(Some("operator disconnected".into())))
                } else {
                    Err(AgentError::Disconnected)
                };
            };
            let line = line.trim();
            let (cmd, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let eval = match cmd {
                "r" => Evaluation::ratify(),
                "f" | "e" => match self.text_or_prompt(rest)? {
                    Some(t) if cmd == "f" => Evaluation::refute(t),
                    Some(t) => Evaluation::refute_explanation(t),
                    None => {
                        self.say("a refutation needs text")?;
                        continue;
                    }
                },
                "x" if request.reject_allowed() => {
                    Evaluation::reject(Some(rest.trim().to_string()).filter(|s| !s.is_empty()))
                }
                "x" => {
                    self.say(&format!(
                        "{} is not available until after message {}",
                        Tag::Reject,
                        request.limits.reject_after
                    ))?;
                    continue;
                }
                _ => {
                    self.say("unrecognized command")?;
                    continue;
                }
            };
            match check_evaluation(&eval, request.exchange, request.limits, request.free_form) {
                Ok(()) => return Ok(eval),
                Err(e) => self.say(&e.to_string())?,
            }
        }
    }
}
