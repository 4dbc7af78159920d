//! Orchestrator plus breadth-first and depth-first research subagents with
//! explicit budgets, a file workspace and a pluggable decision oracle.

mod analysis;
mod knowledge;
mod oracle;
mod orchestrator;
mod plan;
mod subagents;
mod workspace;

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence_graph::GraphError;
use crate::federation::{render_entity, EntityKind, EntityType, FederationError};

pub use analysis::{apply_analysis, run_analysis, AnalysisOutcome, AnalysisSpec, Table};
pub use knowledge::{BudgetedSource, CallLog, CallRecord, KnowledgeSource};
pub use oracle::{lexical_relevance, tokens, DecisionOracle, DefaultOracle, HttpOracle};
pub use orchestrator::{
    run_research, step_orchestrator, Action, Budgets, Findings, Observation, OrchestratorState, ResearchConfig,
    ResearchOutcome, StepRecord,
};
pub use plan::{update_plan, PlanChecklist, PlanStep, StepOutcome, StepStatus};
pub use subagents::{run_bfrs, run_dfrs, Expansion, ExpansionEdge, Screened, SubagentRun};
pub use workspace::{ManifestEntry, Workspace, MANIFEST_FILE, TRANSCRIPT_FILE};

pub const MAX_REPORT_LINES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("budget exhausted")]
    BudgetExhausted,
    #[error("invalid plan step {index} (plan has {len})")]
    InvalidStep { index: usize, len: usize },
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("workspace {path} unavailable: {message}")]
    WorkspaceUnavailable { path: PathBuf, message: String },
    #[error("analysis failed: {0}")]
    Analysis(String),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResearchMode {
    Breadth,
    Depth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEntity {
    pub name: String,
    pub kind: EntityKind,
    /// Standardized identifier such as `@GENE_TP53` or a CURIE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl TaskEntity {
    pub fn new(name: &str, kind: EntityKind) -> Self {
        Self { name: name.to_string(), kind, id: None }
    }
}

/// A node the depth-first agent can expand.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum FrontierNode {
    Paper { pmid: u64 },
    Entity { name: String, entity_type: String },
}

impl FrontierNode {
    pub fn key(&self) -> String {
        match self {
            FrontierNode::Paper { pmid } => format!("PMID:{pmid}"),
            FrontierNode::Entity { name, entity_type } => match entity_type.parse::<EntityType>() {
                Ok(t) => render_entity(t, name),
                Err(_) => format!("@{entity_type}_{name}"),
            },
        }
    }

    /// Text the oracle scores for relevance.
    pub fn text(&self) -> String {
        match self {
            FrontierNode::Paper { pmid } => format!("PMID:{pmid}"),
            FrontierNode::Entity { name, .. } => name.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchTask {
    pub target: String,
    #[serde(default)]
    pub entities: Vec<TaskEntity>,
    pub kbs: Vec<String>,
    pub budget: usize,
    pub mode: ResearchMode,
    #[serde(default)]
    pub seeds: Vec<FrontierNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    /// Relation predicates tried, in turn, when expanding entity nodes.
    #[serde(default = "default_predicates")]
    pub predicates: Vec<String>,
    /// Frontier nodes expanded per layer.
    #[serde(default = "default_width")]
    pub width: usize,
    /// Minimum relevance for a breadth-first candidate to be kept.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_predicates() -> Vec<String> {
    vec!["ASSOCIATE".into()]
}

fn default_width() -> usize {
    2
}

fn default_threshold() -> f64 {
    0.5
}

impl ResearchTask {
    pub fn breadth(target: &str, entities: Vec<TaskEntity>, kbs: &[&str], budget: usize) -> Self {
        Self {
            target: target.to_string(),
            entities,
            kbs: kbs.iter().map(|s| s.to_string()).collect(),
            budget,
            mode: ResearchMode::Breadth,
            seeds: Vec::new(),
            query: None,
            predicates: default_predicates(),
            width: default_width(),
            threshold: default_threshold(),
        }
    }

    pub fn depth(target: &str, seeds: Vec<FrontierNode>, budget: usize) -> Self {
        Self {
            target: target.to_string(),
            entities: Vec::new(),
            kbs: vec!["pubtator".into(), "pubmed".into()],
            budget,
            mode: ResearchMode::Depth,
            seeds,
            query: None,
            predicates: default_predicates(),
            width: default_width(),
            threshold: default_threshold(),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.budget == 0 {
            return Err(AgentError::BudgetExhausted);
        }
        if self.mode == ResearchMode::Depth
            && self.seeds.is_empty()
            && self.query.as_deref().is_none_or(|q| q.trim().is_empty())
        {
            return Err(AgentError::InvalidTask("depth mode needs seeds or an initial query".into()));
        }
        if self.width == 0 {
            return Err(AgentError::InvalidTask("frontier width must be >= 1".into()));
        }
        Ok(())
    }
}

/// Subagent output: saved files with one-line descriptions plus findings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent: String,
    pub manifest: Vec<ManifestEntry>,
    pub findings: Vec<String>,
    pub calls: usize,
}

impl AgentReport {
    pub fn new(agent: &str, manifest: Vec<ManifestEntry>, mut findings: Vec<String>, calls: usize) -> Self {
        let room = MAX_REPORT_LINES.saturating_sub(2 + manifest.len());
        findings.truncate(room);
        Self { agent: agent.to_string(), manifest, findings, calls }
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# Files saved\n");
        for m in &self.manifest {
            writeln!(s, "- {}: {}", m.path, m.description).ok();
        }
        s.push_str("# Main findings\n");
        for f in &self.findings {
            writeln!(s, "- {f}").ok();
        }
        s
    }

    pub fn lines(&self) -> usize {
        self.render().lines().count()
    }
}
