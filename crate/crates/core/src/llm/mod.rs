//! Adapter between the engine and a chat-completion model.
//!
//! The engine speaks to any [`ChatModel`]: the OpenAI-compatible HTTP client,
//! the fixture-driven [`ScriptedLlm`] used in tests, or a [`RecordedLlm`]
//! replaying a run's request log. [`call_llm`] renders a context, issues one
//! request and parses the completion into a [`MachineReply`].

mod mock;
mod openai;
mod parse;
mod prompt;
mod recorded;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::Context;
use crate::dfd::VertexId;
use crate::protocol::{ProgramText, Tag};
use sha2::{Digest, Sha256};

pub use mock::{LlmFixture, ScriptedLlm, FIXTURE_VERSION};
pub use openai::{OpenAiClient, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use parse::{derive_tag, parse_completion, ParsedCompletion};
pub use prompt::{build_initial_prompt, render_decision, render_refutation, summary_request, BRIDGE};
pub use recorded::{LlmLogEntry, RecordedLlm, LLM_LOG_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// Why the engine is asking. Mock models use it to pick a scripted answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Purpose {
    /// A program proposal. `call` counts machine calls within the session,
    /// starting at 1 and running across attempts.
    Program {
        process: VertexId,
        attempt: u32,
        exchange: u32,
        call: u32,
    },
    Summary,
    /// A free-form baseline turn; `call` starts at 1.
    Baseline {
        call: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub purpose: Purpose,
}

impl ChatRequest {
    /// SHA-256 over each message's role and length-prefixed content. The
    /// purpose is not part of the hash: two identical conversations are the
    /// same request.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.messages {
            h.update(m.role.to_string().as_bytes());
            h.update((m.content.len() as u64).to_le_bytes());
            h.update(m.content.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model: String,
    pub temperature: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LlmError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request exceeds the model context: {0}")]
    Oversize(String),
    #[error("no scripted completion: {0}")]
    NoFixture(String),
    #[error("invalid model configuration: {0}")]
    Config(String),
}

impl LlmError {
    /// Short name used in request logs.
    pub fn kind(&self) -> &'static str {
        match self {
            LlmError::Transport { .. } => "transport",
            LlmError::Oversize(_) => "oversize",
            LlmError::NoFixture(_) => "no_fixture",
            LlmError::Config(_) => "config",
        }
    }

    /// Rebuild an error from a log line, keeping what the engine acts on.
    pub fn recorded(kind: &str, message: &str) -> Self {
        match kind {
            "oversize" => LlmError::Oversize(message.to_string()),
            "no_fixture" => LlmError::NoFixture(message.to_string()),
            "config" => LlmError::Config(message.to_string()),
            _ => LlmError::Transport {
                attempts: 0,
                message: message.to_string(),
            },
        }
    }
}

pub trait ChatModel: Send {
    fn info(&self) -> ModelInfo;
    fn complete(&mut self, request: &ChatRequest) -> Result<String, LlmError>;

    /// `request` was answered from a recording instead. Stateful models
    /// advance as if they had answered it.
    fn skip(&mut self, _request: &ChatRequest) {}
}

impl<T: ChatModel + ?Sized> ChatModel for Box<T> {
    fn info(&self) -> ModelInfo {
        (**self).info()
    }

    fn complete(&mut self, request: &ChatRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }

    fn skip(&mut self, request: &ChatRequest) {
        (**self).skip(request)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub transport_retries: u32,
    /// Context size the engine keeps the rendered conversation under.
    pub token_budget: usize,
    pub timeout_secs: u64,
    pub stream: bool,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            temperature: 1.0,
            transport_retries: 2,
            token_budget: 100_000,
            timeout_secs: 300,
            stream: false,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.token_budget == 0 {
            return Err(LlmError::Config("token budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineReply {
    /// REVISE or REFUTE, derived by change detection.
    pub tag: Tag,
    pub program: ProgramText,
    pub explanation: String,
    pub raw: String,
    pub request_hash: String,
}

impl MachineReply {
    /// Parse `raw` and derive the tag against the previous reply's program
    /// and explanation.
    pub fn from_completion(raw: String, previous: Option<(&ProgramText, &str)>, request_hash: String) -> Self {
        let parsed = parse_completion(&raw);
        let tag = derive_tag(previous, &parsed.program, &parsed.explanation);
        MachineReply {
            tag,
            program: parsed.program,
            explanation: parsed.explanation,
            raw,
            request_hash,
        }
    }
}

/// Issue one request built from `context` and parse the answer. `previous`
/// is this session's last machine reply, used to derive the tag.
pub fn call_llm(
    model: &mut dyn ChatModel,
    context: &Context,
    purpose: Purpose,
    previous: Option<(&ProgramText, &str)>,
) -> Result<MachineReply, LlmError> {
    let request = ChatRequest {
        messages: context.render(),
        purpose,
    };
    let raw = model.complete(&request)?;
    Ok(MachineReply::from_completion(raw, previous, request.hash()))
}
