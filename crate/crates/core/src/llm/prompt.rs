//! Text of the turns the engine writes on the human's behalf.

use super::{ChatMessage, ChatRequest, LlmError, Purpose, Role};
use crate::dfd::ProcessSpec;
use crate::hash::short_ref;
use crate::protocol::{ProgramText, Tag};

/// Joins the whole-task description to the sub-task of the current session.
pub const BRIDGE: &str = "While the whole task description is given above, in this current session let us focus only on the users given sub-task: ";

fn labeled(label: &str, text: &str) -> String {
    format!("{label}: {}", text.trim_end())
}

fn render_spec(spec: &ProcessSpec) -> String {
    [
        labeled("Description", &spec.description),
        labeled("Pre-condition", &spec.pre),
        labeled("Post-condition", &spec.post),
    ]
    .join("\n")
}

/// Task description, the bridge sentence, then the labeled specification.
pub fn build_initial_prompt(task_description: &str, spec: &ProcessSpec) -> String {
    format!(
        "{}\n\n{}\n{}",
        task_description.trim_end(),
        BRIDGE.trim_end(),
        render_spec(spec)
    )
}

fn program_ref(program: &ProgramText) -> String {
    match program.content_hash() {
        Some(h) => format!("program {}", short_ref(&h)),
        None => "program empty".to_string(),
    }
}

/// A human REFUTE turn: the tag, a short hash of the refuted program and the
/// refutation verbatim.
pub fn render_refutation(tag: Tag, program: &ProgramText, refutation: &str) -> Result<String, LlmError> {
    if tag != Tag::Refute {
        return Err(LlmError::Config(format!(
            "only REFUTE turns carry a refutation, got {tag}"
        )));
    }
    Ok(format!("REFUTE [{}]\n{}", program_ref(program), refutation))
}

/// A closing RATIFY or REJECT turn, kept in the context so later processes
/// can see which program was accepted.
pub fn render_decision(tag: Tag, program: &ProgramText, note: Option<&str>) -> String {
    match note.filter(|n| !n.trim().is_empty()) {
        Some(n) => format!("{tag} [{}]\n{n}", program_ref(program)),
        None => format!("{tag} [{}]", program_ref(program)),
    }
}

/// Ask the model to condense `transcript` (already rendered) into one note.
pub fn summary_request(transcript: &str) -> ChatRequest {
    ChatRequest {
        messages: vec![
            ChatMessage::new(
                Role::System,
                "Summarize the following part of a programming conversation. Keep every \
                 requirement, decision, refutation and accepted program detail that later \
                 steps may depend on. Answer with the summary only.",
            ),
            ChatMessage::new(Role::User, transcript),
        ],
        purpose: Purpose::Summary,
    }
}
