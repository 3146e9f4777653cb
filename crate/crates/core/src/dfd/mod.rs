//! Data flow diagrams: the labelled DAG of processes, data sources and data
//! stores that structures a synthesis task.
//!
//! Process vertices are guarded functions labelled with a [`ProcessSpec`]
//! (description, pre-condition, post-condition). Sources and stores carry a
//! descriptive text. Edges carry a label naming the information transferred.

mod format;
mod order;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::sha256_hex;

pub(crate) use format::{decode_json, decode_toml};
pub use format::{parse_background, parse_background_toml, parse_dfd, to_document, Document};
pub use order::{check_ordering, process_ordering, reaches};
pub use validate::{validate, validate_background, Finding, ValidationReport};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(String);

impl VertexId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VertexId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// The guarded-function triple labelling a process vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub description: String,
    pub pre: String,
    pub post: String,
}

impl ProcessSpec {
    pub fn new(description: impl Into<String>, pre: impl Into<String>, post: impl Into<String>) -> Self {
        Self {
            description: description.into(),
            pre: pre.into(),
            post: post.into(),
        }
    }

    pub fn is_complete(&self) -> bool {
        [&self.description, &self.pre, &self.post]
            .iter()
            .all(|s| !s.trim().is_empty())
    }

    /// Stable content hash; two processes with identical specs share it.
    pub fn content_hash(&self) -> String {
        // Length-prefixed so that field boundaries cannot alias.
        let mut buf = String::new();
        for field in [&self.description, &self.pre, &self.post] {
            buf.push_str(&field.len().to_string());
            buf.push(':');
            buf.push_str(field);
        }
        sha256_hex(buf)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexKind {
    Process,
    Source,
    Store,
}

impl VertexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VertexKind::Process => "process",
            VertexKind::Source => "source",
            VertexKind::Store => "store",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VertexLabel {
    Process(ProcessSpec),
    Source(String),
    Store(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub id: VertexId,
    pub label: VertexLabel,
}

impl Vertex {
    pub fn process(id: impl Into<String>, spec: ProcessSpec) -> Self {
        Self {
            id: VertexId::new(id),
            label: VertexLabel::Process(spec),
        }
    }

    pub fn source(id: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            id: VertexId::new(id),
            label: VertexLabel::Source(description.into()),
        }
    }

    pub fn store(id: impl Into<String>, description: impl Into<String>) -> Self {
        Self {
            id: VertexId::new(id),
            label: VertexLabel::Store(description.into()),
        }
    }

    pub fn kind(&self) -> VertexKind {
        match self.label {
            VertexLabel::Process(_) => VertexKind::Process,
            VertexLabel::Source(_) => VertexKind::Source,
            VertexLabel::Store(_) => VertexKind::Store,
        }
    }

    pub fn spec(&self) -> Option<&ProcessSpec> {
        match &self.label {
            VertexLabel::Process(spec) => Some(spec),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: VertexId,
    pub to: VertexId,
    pub label: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            from: VertexId::new(from),
            to: VertexId::new(to),
            label: label.into(),
        }
    }
}

/// A data flow diagram. Construction does not enforce the DAG invariants;
/// run [`validate`] (or use [`parse_dfd`], which does) before relying on them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dfd {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl Dfd {
    pub fn vertex(&self, id: &VertexId) -> Option<&Vertex> {
        self.vertices.iter().find(|v| &v.id == id)
    }

    pub fn spec(&self, id: &VertexId) -> Option<&ProcessSpec> {
        self.vertex(id).and_then(Vertex::spec)
    }

    pub fn processes(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter().filter(|v| v.kind() == VertexKind::Process)
    }

    pub(crate) fn position(&self, id: &VertexId) -> Option<usize> {
        self.vertices.iter().position(|v| &v.id == id)
    }
}

/// Background knowledge handed to a run: the diagram plus the overall task text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Background {
    pub dfd: Dfd,
    pub task_description: String,
}

impl Background {
    pub fn new(dfd: Dfd, task_description: impl Into<String>) -> Self {
        Self {
            dfd,
            task_description: task_description.into(),
        }
    }

    /// Hash of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        sha256_hex(self.to_json())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&to_document(self)).expect("document serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DfdError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("vertex {vertex}: unknown kind `{kind}` (expected process, source or store)")]
    UnknownKind { vertex: String, kind: String },
    #[error("vertex {vertex}: missing field `{field}`")]
    MissingField { vertex: String, field: &'static str },
    #[error("vertex {vertex}: field `{field}` is only allowed on process vertices")]
    UnexpectedField { vertex: String, field: &'static str },
    #[error("duplicate vertex id {0}")]
    DuplicateVertex(VertexId),
    #[error("dangling edge {from} -> {to}: no vertex named {missing}")]
    DanglingEdge {
        from: VertexId,
        to: VertexId,
        missing: VertexId,
    },
    #[error("cycle detected: {}", join_ids(.0))]
    Cycle(Vec<VertexId>),
    #[error("invalid diagram: {0}")]
    Invalid(Finding),
    #[error("ordering override rejected: {0}")]
    BadOrdering(String),
}

pub(crate) fn join_ids(ids: &[VertexId]) -> String {
    ids.iter().map(VertexId::as_str).collect::<Vec<_>>().join(", ")
}
