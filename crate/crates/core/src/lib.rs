//! Deep-research toolkit over biomedical knowledge graphs.
//!
//! - [`evidence_graph`]: deduplicated entity/relation/observation memory.
//! - [`federation`]: rate-limited clients and unified multi-source search.
//! - [`pathway`]: KGML/flat-file parsing and signed-graph analytics.
//! - [`curate`]: deterministic generators for the benchmark task families.
//! - [`agents`]: orchestrator plus breadth-first and depth-first research agents.
//! - [`bench`]: open-benchmark preparation and scoring.

pub mod agents;
pub mod bench;
pub mod curate;
pub mod data;
pub mod evidence_graph;
pub mod federation;
pub mod pathway;
