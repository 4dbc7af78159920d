//! KEGG pathway parsing and signed-graph analytics.

mod analytics;
mod flat;
mod functional;
mod graph;
mod kgml;

use thiserror::Error;

pub use analytics::{
    betweenness, betweenness_map, cycle_nodes, k_step_neighborhood, path_polarity,
    path_polarity_idx, strongly_connected_components, terminal_endpoints, Direction, PathCaps,
    Polarity,
};
pub use flat::{parse_flat_record, parse_flat_records, KeggFlatRecord, TargetRef};
pub use functional::{infer_functional_type, FunctionalType, GeneFamilies};
pub use graph::{
    Compound, NodeKind, PathwayNode, Reaction, ReactionGraph, SignedEdge, SignedPathwayGraph,
    SkippedRelation, Topology,
};
pub use kgml::{parse_kgml, relation_weight, GraphSnapshot, SnapshotEdge, SnapshotReaction};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathwayError {
    #[error("node not found: {0}")]
    NodeNotFound(String),
    #[error("malformed KGML at {context}: {message}")]
    MalformedKgml { context: String, message: String },
    #[error("malformed flat record: {0}")]
    MalformedRecord(String),
    #[error("unknown functional type: {0}")]
    UnknownFunctionalType(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Endpoint lexicon shipped with the crate.
pub fn default_endpoint_lexicon() -> Vec<String> {
    serde_json::from_str(crate::data::ENDPOINT_LEXICON).expect("bundled endpoint lexicon")
}
