use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::analysis::{apply_analysis, AnalysisOutcome, AnalysisSpec};
use super::knowledge::{CallLog, CallRecord, KnowledgeSource};
use super::oracle::DecisionOracle;
use super::plan::{PlanChecklist, StepOutcome};
use super::subagents::{run_bfrs, run_dfrs, Expansion, Screened, SubagentRun};
use super::workspace::{Workspace, TRANSCRIPT_FILE};
use super::{AgentError, AgentReport, FrontierNode, ResearchTask};
use crate::evidence_graph::{
    EntityDraft, EntityKind as GraphKind, EntityRef as GraphEntity, EvidenceGraphStore, GraphStats, MergeBatch,
    MergeReport, RelationDraft, SharedGraph, MAX_NEW_ENTITIES, MAX_NEW_RELATIONS,
};
use crate::federation::EntityKind;

/// Orchestrator action vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    InvokeBfrs { task: ResearchTask },
    InvokeDfrs { task: ResearchTask },
    AnalyzeWorkspace { spec: AnalysisSpec },
    UpdateGraph { batch: MergeBatch },
    RetrieveGraph { seeds: Vec<String>, depth: usize },
    Finalize { answer: String },
    Halt,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::InvokeBfrs { .. } => "invoke_bfrs",
            Action::InvokeDfrs { .. } => "invoke_dfrs",
            Action::AnalyzeWorkspace { .. } => "analyze_workspace",
            Action::UpdateGraph { .. } => "update_graph",
            Action::RetrieveGraph { .. } => "retrieve_graph",
            Action::Finalize { .. } => "finalize",
            Action::Halt => "halt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Observation {
    Start { query: String },
    Report { report: AgentReport },
    Analysis { outcome: AnalysisOutcome },
    GraphUpdated { report: MergeReport },
    GraphRetrieved { entities: usize, relations: usize },
    Failed { action: String, reason: String },
}

/// Remaining federation invocations per subagent class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budgets {
    pub bfrs: usize,
    pub dfrs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub action: Action,
    /// The oracle's proposal was replaced by a budget guard.
    pub coerced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Evidence accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Findings {
    pub screened: Vec<Screened>,
    pub expansions: Vec<Expansion>,
    /// Workspace-relative tables available for analysis.
    pub tables: Vec<String>,
    /// Entity names in the last retrieved subgraph.
    pub retrieved: Vec<String>,
}

impl Findings {
    fn absorb(&mut self, run: &SubagentRun) {
        self.screened.extend(run.screened.iter().cloned());
        self.expansions.extend(run.expansions.iter().cloned());
        self.tables.extend(run.report.manifest.iter().filter(|m| m.path.ends_with(".csv")).map(|m| m.path.clone()));
    }

    /// Plain-text answer summarizing the strongest evidence.
    pub fn answer(&self, query: &str) -> String {
        let mut s = format!("Query: {query}\n");
        let mut kept: Vec<&Screened> = self.screened.iter().filter(|c| c.kept).collect();
        kept.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
        if kept.is_empty() {
            s.push_str("No relevant knowledge-base entries were retained.\n");
        } else {
            let names: Vec<&str> = kept.iter().take(5).map(|c| c.name.as_str()).collect();
            writeln!(s, "Relevant entries: {}.", names.join(", ")).ok();
        }
        let mut edges: Vec<(usize, String)> = self
            .expansions
            .iter()
            .flat_map(|e| {
                let pred = e.predicate.clone().unwrap_or_else(|| "CITES".into());
                e.children.iter().map(move |c| (c.pmids.len(), format!("{} {pred} {}", e.node.text(), c.node.text())))
            })
            .collect();
        edges.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        edges.dedup_by(|a, b| a.1 == b.1);
        if edges.is_empty() {
            s.push_str("No literature relations were traced.\n");
        } else {
            let top: Vec<String> = edges.iter().take(5).map(|(n, e)| format!("{e} ({n} PMIDs)")).collect();
            writeln!(s, "Strongest relations: {}.", top.join("; ")).ok();
        }
        if !self.retrieved.is_empty() {
            writeln!(s, "Evidence graph neighbourhood: {} entities.", self.retrieved.len()).ok();
        }
        s
    }
}

pub struct OrchestratorState {
    pub query: String,
    pub plan: PlanChecklist,
    pub budgets: Budgets,
    pub workspace: Workspace,
    pub graph: SharedGraph,
    pub calls: CallLog,
    pub findings: Findings,
    pub kbs: Vec<String>,
    pub answer: Option<String>,
    current_step: Option<usize>,
    log: Vec<StepRecord>,
    bfrs_runs: usize,
    dfrs_runs: usize,
}

impl OrchestratorState {
    pub fn new(query: &str, plan: PlanChecklist, budgets: Budgets, workspace: Workspace, graph: SharedGraph, kbs: Vec<String>) -> Self {
        Self {
            query: query.to_string(),
            plan,
            budgets,
            workspace,
            graph,
            calls: CallLog::new(),
            findings: Findings::default(),
            kbs,
            answer: None,
            current_step: None,
            log: Vec::new(),
            bfrs_runs: 0,
            dfrs_runs: 0,
        }
    }

    /// Append-only record of chosen actions.
    pub fn log(&self) -> &[StepRecord] {
        &self.log
    }

    /// Plan step the last chosen action works on.
    pub fn current_step(&self) -> Option<usize> {
        self.current_step
    }
}

/// Asks the oracle for the next action and validates it against the budgets.
pub fn step_orchestrator(
    state: &mut OrchestratorState,
    observation: &Observation,
    oracle: &dyn DecisionOracle,
) -> Result<Action, AgentError> {
    let proposed = oracle.choose_action(state, observation)?;
    let mut coerced = false;
    let mut note = None;
    let action = match proposed {
        None => {
            note = Some("oracle proposed no tool action".to_string());
            Action::Halt
        }
        Some(Action::InvokeBfrs { .. }) if state.budgets.bfrs == 0 => {
            coerced = true;
            note = Some("bfrs budget exhausted; finalizing".into());
            Action::Finalize { answer: state.findings.answer(&state.query) }
        }
        Some(Action::InvokeDfrs { .. }) if state.budgets.dfrs == 0 => {
            coerced = true;
            note = Some("dfrs budget exhausted; finalizing".into());
            Action::Finalize { answer: state.findings.answer(&state.query) }
        }
        Some(Action::InvokeBfrs { mut task }) => {
            task.budget = clip(task.budget, state.budgets.bfrs);
            Action::InvokeBfrs { task }
        }
        Some(Action::InvokeDfrs { mut task }) => {
            task.budget = clip(task.budget, state.budgets.dfrs);
            Action::InvokeDfrs { task }
        }
        Some(a) => a,
    };
    state.current_step = state.plan.first_open();
    state.log.push(StepRecord { index: state.log.len(), action: action.clone(), coerced, note });
    Ok(action)
}

fn clip(requested: usize, remaining: usize) -> usize {
    if requested == 0 {
        remaining
    } else {
        requested.min(remaining)
    }
}

fn failed(action: &Action, e: impl std::fmt::Display) -> Observation {
    Observation::Failed { action: action.name().to_string(), reason: e.to_string() }
}

fn execute(state: &mut OrchestratorState, action: &Action, ks: &dyn KnowledgeSource, oracle: &dyn DecisionOracle) -> Observation {
    let obs = match action {
        Action::InvokeBfrs { task } => {
            state.bfrs_runs += 1;
            let before = state.calls.count_for("bfrs");
            let prefix = format!("bfrs-{}/", state.bfrs_runs);
            let r = run_bfrs(task, ks, oracle, &mut state.workspace, &state.calls, &prefix);
            state.budgets.bfrs = state.budgets.bfrs.saturating_sub(state.calls.count_for("bfrs") - before);
            match r {
                Ok(run) => {
                    state.findings.absorb(&run);
                    Observation::Report { report: run.report }
                }
                Err(e) => failed(action, e),
            }
        }
        Action::InvokeDfrs { task } => {
            state.dfrs_runs += 1;
            let before = state.calls.count_for("dfrs");
            let prefix = format!("dfrs-{}/", state.dfrs_runs);
            let r = run_dfrs(task, ks, oracle, &mut state.workspace, &state.calls, &prefix);
            state.budgets.dfrs = state.budgets.dfrs.saturating_sub(state.calls.count_for("dfrs") - before);
            match r {
                Ok(run) => {
                    state.findings.absorb(&run);
                    Observation::Report { report: run.report }
                }
                Err(e) => failed(action, e),
            }
        }
        Action::AnalyzeWorkspace { spec } => match apply_analysis(&mut state.workspace, spec) {
            Ok(outcome) => {
                state.findings.tables.push(outcome.output.clone());
                Observation::Analysis { outcome }
            }
            Err(e) => failed(action, e),
        },
        Action::UpdateGraph { batch } => match state.graph.upsert_batch(batch) {
            Ok(report) => Observation::GraphUpdated { report },
            Err(e) => failed(action, e),
        },
        Action::RetrieveGraph { seeds, depth } => {
            let sub = state.graph.read().query_subgraph(seeds, *depth);
            state.findings.retrieved = sub.entities.iter().map(|e| e.name.clone()).collect();
            match state.workspace.save_json(
                "graph/subgraph.json",
                &sub,
                &format!("Evidence subgraph around {} seed(s).", seeds.len()),
            ) {
                Ok(_) => Observation::GraphRetrieved { entities: sub.entities.len(), relations: sub.relations.len() },
                Err(e) => failed(action, e),
            }
        }
        Action::Finalize { .. } | Action::Halt => unreachable!("terminal actions are not executed"),
    };
    if let Some(i) = state.current_step {
        let outcome = match &obs {
            Observation::Failed { reason, .. } => StepOutcome::Failed { note: reason.clone(), replacement: None },
            _ => StepOutcome::Done,
        };
        state.plan.update(i, outcome).ok();
    }
    obs
}

fn graph_kind(kind: EntityKind) -> GraphKind {
    match kind {
        EntityKind::Gene | EntityKind::Protein | EntityKind::Variant => GraphKind::GeneProtein,
        EntityKind::Disease | EntityKind::Phenotype => GraphKind::DiseasePhenotype,
        EntityKind::Drug | EntityKind::Compound => GraphKind::ChemicalDrug,
        EntityKind::Pathway | EntityKind::Function => GraphKind::PathwayGeneset,
        EntityKind::Publication => GraphKind::Paper,
        EntityKind::Trial => GraphKind::Finding,
    }
}

fn node_entity(node: &FrontierNode) -> Option<GraphEntity> {
    match node {
        FrontierNode::Paper { pmid } => {
            Some(GraphEntity::new(format!("PMID:{pmid}"), GraphKind::Paper, "PubMed").with_curie(format!("PMID:{pmid}")))
        }
        FrontierNode::Entity { name, entity_type } => {
            let kind = match entity_type.as_str() {
                "GENE" | "MUTATION" | "VARIANT" => GraphKind::GeneProtein,
                "DISEASE" => GraphKind::DiseasePhenotype,
                "CHEMICAL" => GraphKind::ChemicalDrug,
                "CELLLINE" => GraphKind::CellTissue,
                _ => return None,
            };
            Some(GraphEntity::new(name.clone(), kind, "PubTator"))
        }
    }
}

fn relation_predicate(p: Option<&str>) -> &'static str {
    match p {
        None => "CITES",
        Some("INHIBIT") => "INHIBITS",
        Some("INTERACT") => "BINDS",
        Some(_) => "ASSOCIATED_WITH",
    }
}

const CURIE_PREFIXES: [(&str, &str); 5] =
    [("entrez", "NCBIGene"), ("ensembl", "ENSEMBL"), ("chembl", "CHEMBL"), ("mesh", "MESH"), ("pmid", "PMID")];

fn screened_entity(s: &Screened) -> GraphEntity {
    let source = s.sources.first().cloned().unwrap_or_else(|| "federation".into());
    let e = GraphEntity::new(s.name.clone(), graph_kind(s.kind), source);
    let curie = CURIE_PREFIXES.iter().find_map(|(ns, prefix)| {
        s.first_id(ns).map(|id| if ns == &"chembl" { id.to_string() } else { format!("{prefix}:{id}") })
    });
    match curie {
        Some(c) => e.with_curie(c),
        None => e,
    }
}

/// Admits entities while the batch stays within the new-entity cap.
struct EntitySlots {
    keys: BTreeSet<(String, GraphKind)>,
}

impl EntitySlots {
    fn admit(&mut self, e: &GraphEntity) -> bool {
        if e.validate().is_err() {
            return false;
        }
        let key = (e.name.to_lowercase(), e.kind);
        self.keys.contains(&key) || (self.keys.len() < MAX_NEW_ENTITIES && self.keys.insert(key))
    }
}

/// Merge batch from run findings, kept within the per-cycle caps.
pub fn graph_batch(findings: &Findings, cycle: u64) -> MergeBatch {
    let mut slots = EntitySlots { keys: BTreeSet::new() };
    let mut kept: Vec<&Screened> = findings.screened.iter().filter(|s| s.kept).collect();
    kept.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
    let mut entities: Vec<EntityDraft> = Vec::new();
    let add_entity = |slots: &mut EntitySlots, e: GraphEntity, entities: &mut Vec<EntityDraft>| {
        if slots.admit(&e) && !entities.iter().any(|d| d.entity.name.eq_ignore_ascii_case(&e.name) && d.entity.kind == e.kind) {
            entities.push(e.into());
        }
    };
    let half = MAX_NEW_ENTITIES / 2;
    for s in kept.iter().take(half) {
        add_entity(&mut slots, screened_entity(s), &mut entities);
    }
    let mut relations = Vec::new();
    'outer: for x in &findings.expansions {
        let Some(subject) = node_entity(&x.node) else { continue };
        for c in &x.children {
            if relations.len() >= MAX_NEW_RELATIONS {
                break 'outer;
            }
            let Some(object) = node_entity(&c.node) else { continue };
            let mut probe = EntitySlots { keys: slots.keys.clone() };
            if !(probe.admit(&subject) && probe.admit(&object)) {
                continue;
            }
            slots = probe;
            let evidence = if c.pmids.is_empty() {
                vec![subject.source.clone()]
            } else {
                c.pmids.iter().map(|p| format!("PMID:{p}")).collect()
            };
            let draft = RelationDraft {
                subject: subject.clone(),
                predicate: relation_predicate(x.predicate.as_deref()).to_string(),
                object,
                evidence,
            };
            if !relations.contains(&draft) {
                relations.push(draft);
            }
        }
    }
    for s in kept.iter().skip(half) {
        add_entity(&mut slots, screened_entity(s), &mut entities);
    }
    MergeBatch { entities, relations, observations: Vec::new(), cycle }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchConfig {
    pub query: String,
    pub bfrs_budget: usize,
    pub dfrs_budget: usize,
    pub kbs: Vec<String>,
    pub workspace: PathBuf,
    /// Hard bound on orchestrator turns.
    pub max_steps: usize,
}

impl ResearchConfig {
    pub fn new(query: &str, workspace: impl Into<PathBuf>) -> Self {
        Self {
            query: query.to_string(),
            bfrs_budget: 5,
            dfrs_budget: 5,
            kbs: ["biothings", "kegg", "opentargets", "pubtator", "pubmed"].map(String::from).to_vec(),
            workspace: workspace.into(),
            max_steps: 32,
        }
    }

    pub fn with_budgets(mut self, bfrs: usize, dfrs: usize) -> Self {
        self.bfrs_budget = bfrs;
        self.dfrs_budget = dfrs;
        self
    }

    pub fn with_kbs(mut self, kbs: &[&str]) -> Self {
        self.kbs = kbs.iter().map(|s| s.to_string()).collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchOutcome {
    pub answer: Option<String>,
    pub plan: PlanChecklist,
    pub steps: Vec<StepRecord>,
    pub budgets: Budgets,
    pub calls: Vec<CallRecord>,
    pub graph: GraphStats,
}

/// Runs the orchestrator loop until Finalize, Halt or the step bound.
pub fn run_research(
    config: &ResearchConfig,
    ks: &dyn KnowledgeSource,
    oracle: &dyn DecisionOracle,
) -> Result<ResearchOutcome, AgentError> {
    let mut ws = Workspace::create(&config.workspace)?;
    ws.save_text(TRANSCRIPT_FILE, "", "Run transcript, one action or observation per line.")?;
    let plan = oracle.plan(&config.query)?;
    let budgets = Budgets { bfrs: config.bfrs_budget, dfrs: config.dfrs_budget };
    let mut state = OrchestratorState::new(
        &config.query,
        plan,
        budgets,
        ws,
        SharedGraph::new(EvidenceGraphStore::new()),
        config.kbs.clone(),
    );
    let mut obs = Observation::Start { query: config.query.clone() };
    state.workspace.append_jsonl(TRANSCRIPT_FILE, &json!({ "observation": obs }))?;
    for _ in 0..config.max_steps {
        let action = step_orchestrator(&mut state, &obs, oracle)?;
        let step = state.log.len() - 1;
        state.workspace.append_jsonl(TRANSCRIPT_FILE, &json!({ "step": step, "action": action }))?;
        match &action {
            Action::Halt => break,
            Action::Finalize { answer } => {
                if let Some(i) = state.current_step {
                    let coerced = state.log[step].coerced;
                    let outcome = if coerced {
                        StepOutcome::Failed { note: "finalized early: subagent budget exhausted".into(), replacement: None }
                    } else {
                        StepOutcome::Done
                    };
                    state.plan.update(i, outcome).ok();
                }
                state.answer = Some(answer.clone());
                break;
            }
            _ => {
                obs = execute(&mut state, &action, ks, oracle);
                state.workspace.append_jsonl(TRANSCRIPT_FILE, &json!({ "step": step, "observation": obs }))?;
            }
        }
    }

    let graph_path = state.workspace.path("graph.json");
    state.graph.read().export_graph(&graph_path)?;
    state.workspace.register("graph.json", "Evidence graph built during the run.")?;
    state.workspace.save_text("plan.md", &state.plan.render(), "Final plan checklist.")?;
    if let Some(a) = &state.answer {
        state.workspace.save_text("answer.md", a, "Final answer.")?;
    }
    let graph = state.graph.read().stats();
    Ok(ResearchOutcome {
        answer: state.answer.clone(),
        plan: state.plan.clone(),
        steps: state.log.clone(),
        budgets: state.budgets,
        calls: state.calls.records(),
        graph,
    })
}
