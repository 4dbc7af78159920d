use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Observation, RelationEdge, StoredEntity};
use super::store::EvidenceGraphStore;
use super::GraphError;

/// Snapshot document written by `export_graph`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub entities: Vec<StoredEntity>,
    pub relations: Vec<RelationEdge>,
    pub observations: Vec<Observation>,
    pub conflict_groups: Vec<ConflictGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictGroup {
    pub id: String,
    pub relations: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub observations: usize,
    pub conflict_groups: usize,
    pub entities_by_kind: BTreeMap<String, usize>,
    pub relations_by_predicate: BTreeMap<String, usize>,
}

fn trailing_number(id: &str, prefix: &str) -> u64 {
    id.strip_prefix(prefix)
        .and_then(|n| n.parse().ok())
        .unwrap_or(0)
}

impl EvidenceGraphStore {
    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            entities: self.entities.values().cloned().collect(),
            relations: self.relations.clone(),
            observations: self.observations.values().flatten().cloned().collect(),
            conflict_groups: self
                .conflict_groups
                .iter()
                .map(|(id, rels)| ConflictGroup {
                    id: id.clone(),
                    relations: rels.iter().cloned().collect(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: GraphDocument) -> Result<Self, GraphError> {
        let next_relation = doc
            .relations
            .iter()
            .map(|r| trailing_number(&r.id, "r-"))
            .max()
            .unwrap_or(0);
        let next_group = doc
            .conflict_groups
            .iter()
            .map(|g| trailing_number(&g.id, "cg-"))
            .max()
            .unwrap_or(0);
        let groups: BTreeMap<String, BTreeSet<String>> = doc
            .conflict_groups
            .into_iter()
            .map(|g| (g.id, g.relations.into_iter().collect()))
            .collect();
        EvidenceGraphStore::from_parts(
            doc.entities,
            doc.relations,
            doc.observations,
            groups,
            next_relation,
            next_group,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("graph document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let doc: GraphDocument =
            serde_json::from_str(text).map_err(|e| GraphError::MalformedDocument(e.to_string()))?;
        Self::from_document(doc)
    }

    /// Writes the snapshot document to `destination`.
    pub fn export_graph(&self, destination: &Path) -> Result<GraphDocument, GraphError> {
        let doc = self.to_document();
        if let Some(parent) = destination.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)
                .map_err(|e| GraphError::WorkspaceUnavailable(format!("{}: {e}", parent.display())))?;
        }
        let text = serde_json::to_string_pretty(&doc).expect("graph document serializes");
        fs::write(destination, text + "\n")
            .map_err(|e| GraphError::WorkspaceUnavailable(format!("{}: {e}", destination.display())))?;
        Ok(doc)
    }

    pub fn import_graph(source: &Path) -> Result<Self, GraphError> {
        let text = fs::read_to_string(source)
            .map_err(|e| GraphError::WorkspaceUnavailable(format!("{}: {e}", source.display())))?;
        Self::from_json(&text)
    }

    pub fn stats(&self) -> GraphStats {
        let mut s = GraphStats {
            entities: self.entities.len(),
            relations: self.relations.len(),
            observations: self.observations.values().map(Vec::len).sum(),
            conflict_groups: self.conflict_groups.len(),
            ..Default::default()
        };
        for e in self.entities.values() {
            *s.entities_by_kind.entry(e.kind.to_string()).or_default() += 1;
        }
        for r in &self.relations {
            *s.relations_by_predicate
                .entry(r.predicate.to_string())
                .or_default() += 1;
        }
        s
    }
}
