use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::analysis::Table;
use super::knowledge::{BudgetedSource, CallLog, KnowledgeSource};
use super::oracle::DecisionOracle;
use super::workspace::Workspace;
use super::{AgentError, AgentReport, FrontierNode, ResearchMode, ResearchTask};
use crate::federation::{merge_records, EntityKind, EntityRef, ParsedResponse, QuerySpec};

/// Results requested per breadth-first search.
pub const SEARCH_LIMIT: usize = 10;

/// One screened breadth-first candidate (one per linked record group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screened {
    pub name: String,
    pub kind: EntityKind,
    pub sources: Vec<String>,
    /// `namespace:id` identifiers gathered across sources.
    pub ids: Vec<String>,
    pub score: f64,
    pub kept: bool,
}

impl Screened {
    pub fn first_id(&self, ns: &str) -> Option<&str> {
        self.ids.iter().find_map(|i| i.strip_prefix(ns).and_then(|r| r.strip_prefix(':')))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionEdge {
    pub node: FrontierNode,
    #[serde(default)]
    pub pmids: Vec<u64>,
}

/// One frontier node expanded by the depth-first agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expansion {
    /// Layer of the expanded node; seeds are layer 0.
    pub depth: usize,
    pub node: FrontierNode,
    /// Relation predicate used, or `None` for a citation lookup.
    pub predicate: Option<String>,
    pub children: Vec<ExpansionEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubagentRun {
    pub report: AgentReport,
    pub screened: Vec<Screened>,
    pub expansions: Vec<Expansion>,
}

impl SubagentRun {
    /// Layers reached below the seeds by productive expansions.
    pub fn reached_depth(&self) -> usize {
        self.expansions.iter().filter(|e| !e.children.is_empty()).map(|e| e.depth + 1).max().unwrap_or(0)
    }
}

fn candidate_text(name: &str, ids: &[String]) -> String {
    let mut fields = vec![name.to_string()];
    fields.extend(ids.iter().map(|i| i.split_once(':').map_or(i.as_str(), |(_, v)| v).to_string()));
    fields.join(" | ")
}

/// Breadth-first survey: one single-source search per (entity, knowledge base)
/// pair until the budget runs out, then relevance screening.
pub fn run_bfrs(
    task: &ResearchTask,
    ks: &dyn KnowledgeSource,
    oracle: &dyn DecisionOracle,
    ws: &mut Workspace,
    log: &CallLog,
    prefix: &str,
) -> Result<SubagentRun, AgentError> {
    task.validate()?;
    if task.mode != ResearchMode::Breadth {
        return Err(AgentError::InvalidTask("breadth agent needs a breadth task".into()));
    }
    if task.entities.is_empty() {
        return Err(AgentError::InvalidTask("breadth task lists no entities".into()));
    }
    let mut src = BudgetedSource::new(ks, log, "bfrs", task.budget);
    let pairs: Vec<_> = task
        .entities
        .iter()
        .flat_map(|e| task.kbs.iter().map(move |kb| (e, kb)))
        .filter(|(e, kb)| src.supports(kb, e.kind))
        .collect();

    let mut responses = Vec::new();
    let mut failures = Vec::new();
    for (entity, kb) in pairs {
        if src.remaining() == 0 {
            break;
        }
        let spec = QuerySpec::new(entity.kind, entity.name.clone()).with_sources(&[kb.as_str()]).with_limit(SEARCH_LIMIT);
        match src.search(&spec)? {
            Ok(r) => responses.push(ParsedResponse { source: kb.clone(), records: r.records }),
            Err(e) => failures.push(format!("{kb} failed for {}: {e}", entity.name)),
        }
    }
    let searches = src.used();

    let mut screened = Vec::new();
    let mut seen_clusters = BTreeSet::new();
    for r in merge_records(responses) {
        if !seen_clusters.insert(r.cluster) {
            continue;
        }
        let ids: Vec<String> = r.xrefs.iter().flat_map(|(ns, v)| v.iter().map(move |x| format!("{ns}:{}", x.id))).collect();
        let score = oracle.score_relevance(&candidate_text(&r.name, &ids), &task.target).clamp(0.0, 1.0);
        screened.push(Screened {
            name: r.name.clone(),
            kind: r.kind,
            sources: r.sources.clone(),
            ids,
            score,
            kept: score >= task.threshold,
        });
    }

    let mut table = Table::new(&["name", "kind", "sources", "ids", "score", "decision"]);
    for s in &screened {
        table.push(vec![
            s.name.clone(),
            s.kind.to_string(),
            s.sources.join(";"),
            s.ids.join(";"),
            format!("{:.3}", s.score),
            if s.kept { "include" } else { "exclude" }.into(),
        ]);
    }
    let kept: Vec<&Screened> = screened.iter().filter(|s| s.kept).collect();
    let mut manifest = Vec::new();
    manifest.push(ws.save_json(
        &format!("{prefix}screened.json"),
        &kept,
        &format!("Candidates kept after relevance screening ({}).", kept.len()),
    )?);
    manifest.push(ws.save_text(
        &format!("{prefix}screening.csv"),
        &table.to_csv()?,
        &format!("Screening decisions for all {} candidates.", screened.len()),
    )?);

    let mut findings = vec![format!(
        "{} candidates from {searches} searches; {} kept at relevance >= {:.2}.",
        screened.len(),
        kept.len(),
        task.threshold
    )];
    let mut ranked = kept.clone();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
    findings.extend(failures.iter().take(1).cloned());
    findings.extend(ranked.iter().map(|s| {
        let ids = if s.ids.is_empty() { "no ids".to_string() } else { s.ids.iter().take(3).cloned().collect::<Vec<_>>().join(", ") };
        format!("{} ({}; {ids}) relevance {:.2} from {}", s.name, s.kind, s.score, s.sources.join("+"))
    }));
    Ok(SubagentRun { report: AgentReport::new("bfrs", manifest, findings, searches), screened, expansions: Vec::new() })
}

fn dedup_push(list: &mut Vec<FrontierNode>, node: FrontierNode) {
    if !list.contains(&node) {
        list.push(node);
    }
}

/// Depth-first exploration: layer by layer, the oracle picks frontier nodes to
/// expand through citation or relation lookups.
pub fn run_dfrs(
    task: &ResearchTask,
    ks: &dyn KnowledgeSource,
    oracle: &dyn DecisionOracle,
    ws: &mut Workspace,
    log: &CallLog,
    prefix: &str,
) -> Result<SubagentRun, AgentError> {
    task.validate()?;
    if task.mode != ResearchMode::Depth {
        return Err(AgentError::InvalidTask("depth agent needs a depth task".into()));
    }
    let mut src = BudgetedSource::new(ks, log, "dfrs", task.budget);
    let mut frontier: Vec<FrontierNode> = Vec::new();
    for s in &task.seeds {
        dedup_push(&mut frontier, s.clone());
    }
    let mut notes = Vec::new();
    if frontier.is_empty() {
        let query = task.query.clone().unwrap_or_default();
        let kb = task
            .kbs
            .iter()
            .find(|kb| src.supports(kb, EntityKind::Publication))
            .cloned()
            .unwrap_or_else(|| "pubmed".into());
        let spec = QuerySpec::new(EntityKind::Publication, query).with_sources(&[kb.as_str()]).with_limit(SEARCH_LIMIT);
        match src.search(&spec)? {
            Ok(r) => {
                for rec in r.records {
                    if let Some(p) = rec.first_id("pmid").and_then(|p| p.parse().ok()) {
                        dedup_push(&mut frontier, FrontierNode::Paper { pmid: p });
                    }
                }
            }
            Err(e) => notes.push(format!("seed search failed: {e}")),
        }
    }

    let predicates = if task.predicates.is_empty() { vec!["ASSOCIATE".to_string()] } else { task.predicates.clone() };
    let mut next_predicate = 0usize;
    let mut visited: BTreeSet<String> = BTreeSet::new();
    let mut expansions = Vec::new();
    let mut depth = 0usize;
    while src.remaining() > 0 {
        let candidates: Vec<FrontierNode> = frontier.iter().filter(|n| !visited.contains(&n.key())).cloned().collect();
        let selected = oracle.select_frontier(&candidates, &task.target, task.width);
        if selected.is_empty() {
            break;
        }
        let mut next = Vec::new();
        for node in selected {
            if src.remaining() == 0 {
                break;
            }
            visited.insert(node.key());
            let (predicate, result) = match &node {
                FrontierNode::Paper { pmid } => (
                    None,
                    src.citations(*pmid)?.map(|ps| {
                        ps.into_iter().map(|p| ExpansionEdge { node: FrontierNode::Paper { pmid: p }, pmids: vec![*pmid] }).collect::<Vec<_>>()
                    }),
                ),
                FrontierNode::Entity { name, entity_type } => {
                    let predicate = predicates[next_predicate % predicates.len()].clone();
                    next_predicate += 1;
                    let entity = EntityRef::typed(entity_type, name);
                    let result = src.related(&entity, &predicate)?.map(|rel| {
                        rel.into_iter()
                            .map(|r| ExpansionEdge {
                                node: FrontierNode::Entity {
                                    name: r.entity.name.clone(),
                                    entity_type: r.entity.entity_type.clone().unwrap_or_else(|| entity_type.clone()),
                                },
                                pmids: r.pmids,
                            })
                            .collect::<Vec<_>>()
                    });
                    (Some(predicate), result)
                }
            };
            let (children, error) = match result {
                Ok(c) => (c, None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            for c in &children {
                if !visited.contains(&c.node.key()) {
                    dedup_push(&mut next, c.node.clone());
                }
            }
            expansions.push(Expansion { depth, node, predicate, children, error });
        }
        // Unselected nodes stay available to later layers.
        frontier.retain(|n| !visited.contains(&n.key()));
        for n in next {
            dedup_push(&mut frontier, n);
        }
        depth += 1;
    }

    let calls = src.calls().to_vec();
    let mut manifest = Vec::new();
    let log_rel = format!("{prefix}calls.jsonl");
    let text: String = calls.iter().map(|c| serde_json::to_string(c).unwrap_or_default() + "\n").collect();
    manifest.push(ws.save_text(&log_rel, &text, &format!("Federation calls made by this agent ({}).", calls.len()))?);

    let productive: Vec<&Expansion> = expansions.iter().filter(|e| !e.children.is_empty()).collect();
    let mut findings = notes;
    let run = |manifest, findings| SubagentRun {
        report: AgentReport::new("dfrs", manifest, findings, calls.len()),
        screened: Vec::new(),
        expansions: expansions.clone(),
    };
    if productive.is_empty() {
        findings.insert(0, format!("No expansion: {} node(s) tried, no citations or related entities found.", expansions.len()));
        return Ok(run(manifest, findings));
    }

    let mut edges = Table::new(&["depth", "parent", "predicate", "child", "pmids"]);
    for e in &expansions {
        for c in &e.children {
            edges.push(vec![
                e.depth.to_string(),
                e.node.key(),
                e.predicate.clone().unwrap_or_else(|| "CITES".into()),
                c.node.key(),
                c.pmids.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
            ]);
        }
    }
    manifest.push(ws.save_json(
        &format!("{prefix}expansions.json"),
        &expansions,
        &format!("Layered expansion trace ({} nodes expanded).", expansions.len()),
    )?);
    manifest.push(ws.save_text(
        &format!("{prefix}edges.csv"),
        &edges.to_csv()?,
        &format!("Discovered edges ({} rows).", edges.rows.len()),
    )?);
    let discovered: BTreeSet<String> = productive.iter().flat_map(|e| e.children.iter().map(|c| c.node.key())).collect();
    let layers = productive.iter().map(|e| e.depth + 1).max().unwrap_or(0);
    findings.insert(
        0,
        format!("Expanded {} node(s) across {layers} layer(s); {} distinct nodes discovered.", expansions.len(), discovered.len()),
    );
    let mut best: BTreeMap<(std::cmp::Reverse<usize>, String), String> = BTreeMap::new();
    for e in &productive {
        for c in &e.children {
            let pred = e.predicate.clone().unwrap_or_else(|| "CITES".into());
            let line = format!("{} {pred} {} ({} PMIDs)", e.node.text(), c.node.text(), c.pmids.len());
            best.entry((std::cmp::Reverse(c.pmids.len()), line.clone())).or_insert(line);
        }
    }
    findings.extend(best.into_values());
    Ok(run(manifest, findings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::oracle::DefaultOracle;
    use crate::agents::TaskEntity;
    use crate::federation::{FederationError, FetchResult, RelatedEntity, UnifiedRecord};

    /// Knowledge source with a fixed citation chain 1 -> 2 -> 3 -> 4.
    struct Chain;

    impl KnowledgeSource for Chain {
        fn supports(&self, source: &str, kind: EntityKind) -> bool {
            kind == EntityKind::Gene && source != "pubmed"
        }
        fn search(&self, spec: &QuerySpec) -> Result<FetchResult, FederationError> {
            let src = spec.sources[0].clone();
            let mut xrefs = BTreeMap::new();
            xrefs.insert("symbol".to_string(), BTreeSet::from([spec.query.clone()]));
            let records = vec![UnifiedRecord::single(&src, spec.kind, &spec.query, xrefs, 0, serde_json::Value::Null)];
            Ok(FetchResult {
                kind: spec.kind,
                query: spec.query.clone(),
                records,
                summary: String::new(),
                manifest: Vec::new(),
                status: Vec::new(),
            })
        }
        fn related(&self, _: &EntityRef, _: &str) -> Result<Vec<RelatedEntity>, FederationError> {
            Ok(Vec::new())
        }
        fn citations(&self, pmid: u64) -> Result<Vec<u64>, FederationError> {
            Ok(if pmid < 4 { vec![pmid + 1] } else { Vec::new() })
        }
    }

    #[test]
    fn bfrs_respects_budget() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::create(dir.path()).unwrap();
        let log = CallLog::new();
        let kbs = ["kegg", "biothings", "opentargets", "uniprot", "pubmed"];
        let task = ResearchTask::breadth("TP53 in cancer", vec![TaskEntity::new("TP53", EntityKind::Gene)], &kbs, 3);
        let run = run_bfrs(&task, &Chain, &DefaultOracle, &mut ws, &log, "b/").unwrap();
        assert_eq!(log.count_for("bfrs"), 3);
        assert_eq!(run.report.calls, 3);
        assert!(run.report.render().starts_with("# Files saved\n"));
        assert!(run.report.lines() <= 10);
        assert_eq!(run.screened.len(), 1);
        assert!(run.screened[0].kept);
        for m in &run.report.manifest {
            assert!(ws.exists(&m.path));
        }
    }

    #[test]
    fn dfrs_follows_chain() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::create(dir.path()).unwrap();
        let log = CallLog::new();
        let task = ResearchTask::depth("chain", vec![FrontierNode::Paper { pmid: 1 }], 4);
        let run = run_dfrs(&task, &Chain, &DefaultOracle, &mut ws, &log, "d/").unwrap();
        assert!(run.reached_depth() >= 2);
        assert!(log.count_for("dfrs") <= 4);
        assert!(ws.exists("d/edges.csv"));

        let none = ResearchTask::depth("chain", vec![FrontierNode::Paper { pmid: 99 }], 4);
        let run = run_dfrs(&none, &Chain, &DefaultOracle, &mut ws, &log, "n/").unwrap();
        assert_eq!(run.report.manifest.len(), 1);
        assert!(run.report.findings[0].starts_with("No expansion"));
    }

    #[test]
    fn zero_budget() {
        let dir = tempfile::tempdir().unwrap();
        let mut ws = Workspace::create(dir.path()).unwrap();
        let task = ResearchTask::depth("x", vec![FrontierNode::Paper { pmid: 1 }], 0);
        let err = run_dfrs(&task, &Chain, &DefaultOracle, &mut ws, &CallLog::new(), "").unwrap_err();
        assert_eq!(err, AgentError::BudgetExhausted);
    }
}
