//! Deduplicated evidence graph used as the research agents' long-lived memory.
//!
//! Entities are matched by CURIE first and by `(kind, normalized label)`
//! second; a match updates the existing node instead of creating a new one.
//! Each merge cycle is capped at [`MAX_NEW_ENTITIES`] new entities and
//! [`MAX_NEW_RELATIONS`] new relations, and an over-limit or invalid batch is
//! rejected without touching the store.

mod export;
mod model;
mod store;

use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use thiserror::Error;

pub use export::{GraphDocument, GraphStats};
pub use model::{
    name_within_limits, normalize_curie, word_count, EntityDraft, EntityKind, EntityRef,
    MergeBatch, MergeReport, Observation, ObservationDraft, Predicate, RelationDraft,
    RelationEdge, StoredEntity, MAX_NAME_CHARS, MAX_NAME_WORDS, MAX_OBSERVATION_WORDS,
};
pub use store::{EvidenceGraphStore, Subgraph, MAX_NEW_ENTITIES, MAX_NEW_RELATIONS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("label is empty after trimming")]
    EmptyLabel,
    #[error("invalid entity name {name:?}: {reason}")]
    InvalidName { name: String, reason: String },
    #[error("missing evidence/provenance on {0}")]
    MissingEvidence(String),
    #[error("unknown predicate {0:?}")]
    UnknownPredicate(String),
    #[error("unknown entity kind {0:?}")]
    UnknownKind(String),
    #[error("observation on {entity:?} has {words} words (max 30)")]
    ObservationTooLong { entity: String, words: usize },
    #[error("batch exceeds merge-cycle limits: {new_entities} new entities (max 10), {new_relations} new relations (max 16)")]
    BatchLimitExceeded {
        new_entities: usize,
        new_relations: usize,
    },
    #[error("relation {0} not found")]
    RelationNotFound(String),
    #[error("relations {0} and {1} connect different endpoints")]
    MismatchedEndpoints(String, String),
    #[error("workspace unavailable: {0}")]
    WorkspaceUnavailable(String),
    #[error("malformed graph document: {0}")]
    MalformedDocument(String),
}

/// Dedup key for labels: case folded, internal whitespace collapsed,
/// leading/trailing punctuation stripped.
pub fn normalize_label(raw: &str) -> Result<String, GraphError> {
    let folded: String = raw.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    let stripped = collapsed
        .trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation() || is_unicode_punct(c));
    if stripped.is_empty() {
        return Err(GraphError::EmptyLabel);
    }
    Ok(stripped.to_string())
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2018}'..='\u{201F}' | '\u{2010}'..='\u{2015}' | '\u{00AB}' | '\u{00BB}' | '\u{2026}'
    )
}

/// Single-writer, many-reader handle around a store.
#[derive(Debug, Clone, Default)]
pub struct SharedGraph {
    inner: Arc<RwLock<EvidenceGraphStore>>,
}

impl SharedGraph {
    pub fn new(store: EvidenceGraphStore) -> Self {
        Self {
            inner: Arc::new(RwLock::new(store)),
        }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, EvidenceGraphStore> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, EvidenceGraphStore> {
        self.inner.write().unwrap_or_else(|e| e.into_inner())
    }

    pub fn upsert_batch(&self, batch: &MergeBatch) -> Result<MergeReport, GraphError> {
        self.write().upsert_batch(batch)
    }
}
