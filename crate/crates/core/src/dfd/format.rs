//! The DFD document format: strict JSON (canonical) with a TOML front-end that
//! decodes into the same document structure.
//!
//! ```json
//! {
//!   "task_description": "...",
//!   "vertices": [
//!     {"id": "S1", "kind": "source", "description": "galaxy catalogue"},
//!     {"id": "P1", "kind": "process", "description": "...", "pre": "...", "post": "..."}
//!   ],
//!   "edges": [{"from": "S1", "to": "P1", "label": "raw csv"}]
//! }
//! ```

use serde::{Deserialize, Serialize};

use super::{
    validate_background, Background, Dfd, DfdError, Edge, Finding, ProcessSpec, Vertex, VertexId, VertexLabel,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub task_description: String,
    pub vertices: Vec<DocVertex>,
    #[serde(default)]
    pub edges: Vec<DocEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocVertex {
    pub id: String,
    pub kind: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocEdge {
    pub from: String,
    pub to: String,
    pub label: String,
}

impl Document {
    /// Structural decode: kinds and per-kind fields are checked, graph
    /// invariants are not.
    pub fn into_background(self) -> Result<Background, DfdError> {
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for v in self.vertices {
            let label = match v.kind.as_str() {
                "process" => {
                    let pre = v.pre.ok_or_else(|| DfdError::MissingField {
                        vertex: v.id.clone(),
                        field: "pre",
                    })?;
                    let post = v.post.ok_or_else(|| DfdError::MissingField {
                        vertex: v.id.clone(),
                        field: "post",
                    })?;
                    VertexLabel::Process(ProcessSpec::new(v.description, pre, post))
                }
                "source" | "store" => {
                    if v.pre.is_some() {
                        return Err(DfdError::UnexpectedField {
                            vertex: v.id,
                            field: "pre",
                        });
                    }
                    if v.post.is_some() {
                        return Err(DfdError::UnexpectedField {
                            vertex: v.id,
                            field: "post",
                        });
                    }
                    if v.kind == "source" {
                        VertexLabel::Source(v.description)
                    } else {
                        VertexLabel::Store(v.description)
                    }
                }
                _ => {
                    return Err(DfdError::UnknownKind {
                        vertex: v.id,
                        kind: v.kind,
                    })
                }
            };
            vertices.push(Vertex {
                id: VertexId::new(v.id),
                label,
            });
        }
        let edges = self
            .edges
            .into_iter()
            .map(|e| Edge::new(e.from, e.to, e.label))
            .collect();
        Ok(Background {
            dfd: Dfd { vertices, edges },
            task_description: self.task_description,
        })
    }
}

pub fn to_document(background: &Background) -> Document {
    let vertices = background
        .dfd
        .vertices
        .iter()
        .map(|v| match &v.label {
            VertexLabel::Process(spec) => DocVertex {
                id: v.id.to_string(),
                kind: "process".into(),
                description: spec.description.clone(),
                pre: Some(spec.pre.clone()),
                post: Some(spec.post.clone()),
            },
            VertexLabel::Source(text) | VertexLabel::Store(text) => DocVertex {
                id: v.id.to_string(),
                kind: v.kind().as_str().into(),
                description: text.clone(),
                pre: None,
                post: None,
            },
        })
        .collect();
    let edges = background
        .dfd
        .edges
        .iter()
        .map(|e| DocEdge {
            from: e.from.to_string(),
            to: e.to.to_string(),
            label: e.label.clone(),
        })
        .collect();
    Document {
        task_description: background.task_description.clone(),
        vertices,
        edges,
    }
}

/// Decode a JSON document without checking graph invariants. Used by
/// `validate`, which wants to see every violation rather than the first.
pub(crate) fn decode_json(document: &str) -> Result<Background, DfdError> {
    let doc: Document = serde_json::from_str(document).map_err(|e| DfdError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    doc.into_background()
}

pub(crate) fn decode_toml(document: &str) -> Result<Background, DfdError> {
    let doc: Document = toml::from_str(document).map_err(|e| {
        let (line, column) = e.span().map(|span| line_col(document, span.start)).unwrap_or((0, 0));
        DfdError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    doc.into_background()
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    (line, column)
}

/// Parse and fully validate a JSON DFD document.
pub fn parse_background(document: &str) -> Result<Background, DfdError> {
    checked(decode_json(document)?)
}

/// Parse and fully validate a TOML DFD document.
pub fn parse_background_toml(document: &str) -> Result<Background, DfdError> {
    checked(decode_toml(document)?)
}

/// Parse a JSON document and return only its diagram.
pub fn parse_dfd(document: &str) -> Result<Dfd, DfdError> {
    parse_background(document).map(|bg| bg.dfd)
}

fn checked(background: Background) -> Result<Background, DfdError> {
    let report = validate_background(&background);
    match report.findings.into_iter().next() {
        None => Ok(background),
        Some(Finding::Cycle(ids)) => Err(DfdError::Cycle(ids)),
        Some(Finding::DuplicateVertex(id)) => Err(DfdError::DuplicateVertex(id)),
        Some(Finding::DanglingEdge { from, to, missing }) => Err(DfdError::DanglingEdge { from, to, missing }),
        Some(other) => Err(DfdError::Invalid(other)),
    }
}
