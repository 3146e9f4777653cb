//! The rolling conversation handed to the model.
//!
//! Items keep insertion order and carry their origin. Pinned items (the task
//! description and the INIT prompt of the process being built) are never
//! summarized away. A summary item records the ids it replaced.

use serde::{Deserialize, Serialize};

use crate::dfd::VertexId;
use crate::llm::{ChatMessage, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Task,
    Init {
        process: VertexId,
    },
    Machine {
        process: VertexId,
    },
    Human {
        process: VertexId,
    },
    Summary {
        replaced: Vec<ItemId>,
    },
    /// Free-form turns outside the tag protocol.
    Turn,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextItem {
    pub id: ItemId,
    pub origin: Origin,
    pub role: Role,
    pub text: String,
    pub pinned: bool,
}

pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> usize;
}

/// `ceil(chars / n)` tokens per text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CharsPerToken(pub usize);

impl Default for CharsPerToken {
    fn default() -> Self {
        CharsPerToken(4)
    }
}

impl TokenEstimator for CharsPerToken {
    fn estimate(&self, text: &str) -> usize {
        text.chars().count().div_ceil(self.0.max(1))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    items: Vec<ContextItem>,
    next_id: u64,
}

impl Context {
    /// `C_0`: just the pinned task description.
    pub fn new(task_description: &str) -> Self {
        let mut c = Context::default();
        let id = c.push(Origin::Task, Role::System, task_description);
        c.set_pinned(id, true);
        c
    }

    pub fn push(&mut self, origin: Origin, role: Role, text: impl Into<String>) -> ItemId {
        let id = ItemId(self.next_id);
        self.next_id += 1;
        self.items.push(ContextItem {
            id,
            origin,
            role,
            text: text.into(),
            pinned: false,
        });
        id
    }

    pub fn push_user(&mut self, text: impl Into<String>) -> ItemId {
        self.push(Origin::Turn, Role::User, text)
    }

    pub fn push_assistant(&mut self, text: impl Into<String>) -> ItemId {
        self.push(Origin::Turn, Role::Assistant, text)
    }

    pub fn set_pinned(&mut self, id: ItemId, pinned: bool) {
        if let Some(item) = self.items.iter_mut().find(|i| i.id == id) {
            item.pinned = pinned;
        }
    }

    /// Pin INIT prompt `id` and unpin every other INIT prompt.
    pub fn pin_init(&mut self, id: ItemId) {
        for item in &mut self.items {
            if let Origin::Init { .. } = item.origin {
                item.pinned = item.id == id;
            }
        }
    }

    pub fn items(&self) -> &[ContextItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn tokens(&self, estimator: &dyn TokenEstimator) -> usize {
        self.items.iter().map(|i| estimator.estimate(&i.text)).sum()
    }

    pub fn contains_text(&self, needle: &str) -> bool {
        self.items.iter().any(|i| i.text.contains(needle))
    }

    pub fn render(&self) -> Vec<ChatMessage> {
        self.items
            .iter()
            .map(|i| ChatMessage::new(i.role, i.text.clone()))
            .collect()
    }

    pub fn remove(&mut self, ids: &[ItemId]) {
        self.items.retain(|i| !ids.contains(&i.id));
    }

    /// Replace the items `ids` by one summary, placed where the first of
    /// them stood. Returns the summary's id, or `None` if an id is unknown
    /// or pinned.
    pub fn replace_with_summary(&mut self, ids: &[ItemId], summary: &str) -> Option<ItemId> {
        if ids.is_empty() {
            return None;
        }
        let mut positions = Vec::with_capacity(ids.len());
        for id in ids {
            let pos = self.items.iter().position(|i| i.id == *id)?;
            if self.items[pos].pinned {
                return None;
            }
            positions.push(pos);
        }
        let at = *positions.iter().min().expect("non-empty");
        let id = ItemId(self.next_id);
        self.next_id += 1;
        self.items.retain(|i| !ids.contains(&i.id));
        self.items.insert(
            at,
            ContextItem {
                id,
                origin: Origin::Summary { replaced: ids.to_vec() },
                role: Role::System,
                text: summary.to_string(),
                pinned: false,
            },
        );
        Some(id)
    }
}
