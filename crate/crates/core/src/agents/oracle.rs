use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde_json::{json, Value};

use super::orchestrator::{graph_batch, Action, Observation, OrchestratorState};
use super::{AgentError, AnalysisSpec, FrontierNode, PlanChecklist, ResearchTask, TaskEntity};
use crate::federation::{EntityKind, HttpRequest, Transport};

/// Planner and judge consulted by the orchestrator and subagents.
pub trait DecisionOracle: Send + Sync {
    fn plan(&self, query: &str) -> Result<PlanChecklist, AgentError>;

    /// Next action for the orchestrator; `None` when the oracle proposes no tool action.
    fn choose_action(&self, state: &OrchestratorState, observation: &Observation) -> Result<Option<Action>, AgentError>;

    /// Relevance of `candidate` to `target` in `[0, 1]`.
    fn score_relevance(&self, candidate: &str, target: &str) -> f64;

    /// Frontier nodes worth expanding next, best first.
    fn select_frontier(&self, frontier: &[FrontierNode], target: &str, width: usize) -> Vec<FrontierNode> {
        let mut scored: Vec<(f64, String, &FrontierNode)> =
            frontier.iter().map(|n| (self.score_relevance(&n.text(), target), n.key(), n)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        scored.into_iter().take(width).map(|(_, _, n)| n.clone()).collect()
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "by", "does", "for", "from", "how", "in", "is", "of", "on", "or", "the",
    "to", "what", "which", "with",
];

/// Lowercased alphanumeric tokens minus stopwords.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Overlap coefficient between target tokens and the best-matching `|`-separated
/// field of the candidate (name, identifiers).
pub fn lexical_relevance(candidate: &str, target: &str) -> f64 {
    let t = tokens(target);
    if t.is_empty() {
        return 0.0;
    }
    candidate
        .split('|')
        .map(tokens)
        .filter(|c| !c.is_empty())
        .map(|c| c.intersection(&t).count() as f64 / c.len().min(t.len()) as f64)
        .fold(0.0, f64::max)
}

fn gene_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b[A-Z][A-Z0-9]{1,9}\b").expect("gene pattern"))
}

fn pmid_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"PMID:?\s*(\d+)").expect("pmid pattern"))
}

const NOT_GENES: &[&str] = &["AND", "OR", "NOT", "THE", "PMID", "DNA", "RNA", "WHAT", "HOW", "WHICH"];

/// Gene-symbol-like tokens of a query, in order of first appearance.
pub(crate) fn gene_symbols(query: &str) -> Vec<String> {
    let mut seen = BTreeSet::new();
    gene_re()
        .find_iter(query)
        .map(|m| m.as_str())
        .filter(|s| !NOT_GENES.contains(s))
        .filter(|s| seen.insert(s.to_string()))
        .map(str::to_string)
        .collect()
}

pub(crate) fn query_pmids(query: &str) -> Vec<u64> {
    let mut seen = BTreeSet::new();
    pmid_re()
        .captures_iter(query)
        .filter_map(|c| c[1].parse().ok())
        .filter(|p| seen.insert(*p))
        .collect()
}

fn query_entities(query: &str) -> Vec<TaskEntity> {
    let genes = gene_symbols(query);
    if genes.is_empty() {
        let name = query.trim().trim_end_matches('?').to_string();
        return vec![TaskEntity::new(&name, EntityKind::Disease)];
    }
    genes
        .iter()
        .map(|g| TaskEntity { id: Some(format!("@GENE_{g}")), ..TaskEntity::new(g, EntityKind::Gene) })
        .collect()
}

/// Template planner with lexical relevance; needs no model.
#[derive(Debug, Clone, Default)]
pub struct DefaultOracle;

impl DefaultOracle {
    pub const SURVEY_PLAN: [&'static str; 6] = [
        "Survey the knowledge bases for the query entities",
        "Tabulate screened candidates by source",
        "Trace literature relations from the top candidates",
        "Record the findings in the evidence graph",
        "Retrieve the evidence subgraph around the query entities",
        "Answer the query from the collected evidence",
    ];

    pub const LITERATURE_PLAN: [&'static str; 4] = [
        "Trace citation chains from the seed papers",
        "Record the findings in the evidence graph",
        "Retrieve the evidence subgraph around the seed papers",
        "Answer the query from the collected evidence",
    ];

    fn dfrs_task(state: &OrchestratorState) -> ResearchTask {
        let mut seeds: Vec<FrontierNode> =
            query_pmids(&state.query).into_iter().map(|pmid| FrontierNode::Paper { pmid }).collect();
        let mut kept: Vec<_> = state.findings.screened.iter().filter(|s| s.kept).collect();
        kept.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
        for s in kept {
            if let Some(t) = s.kind.entity_type() {
                let node = FrontierNode::Entity { name: s.name.clone(), entity_type: t.as_str().to_string() };
                if !seeds.contains(&node) {
                    seeds.push(node);
                }
            }
        }
        if seeds.is_empty() {
            seeds = gene_symbols(&state.query)
                .into_iter()
                .map(|g| FrontierNode::Entity { name: g, entity_type: "GENE".into() })
                .collect();
        }
        let mut task = ResearchTask::depth(&state.query, seeds, state.budgets.dfrs);
        if task.seeds.is_empty() {
            task.query = Some(state.query.clone());
        }
        task
    }
}

impl DecisionOracle for DefaultOracle {
    fn plan(&self, query: &str) -> Result<PlanChecklist, AgentError> {
        Ok(if query_pmids(query).is_empty() {
            PlanChecklist::new(Self::SURVEY_PLAN)
        } else {
            PlanChecklist::new(Self::LITERATURE_PLAN)
        })
    }

    fn choose_action(&self, state: &OrchestratorState, _observation: &Observation) -> Result<Option<Action>, AgentError> {
        let Some(step) = state.plan.first_open().map(|i| &state.plan.steps[i]) else {
            return Ok(None);
        };
        let verb = step.text.split_whitespace().next().unwrap_or("").to_lowercase();
        let action = match verb.as_str() {
            "survey" => Action::InvokeBfrs {
                task: ResearchTask::breadth(
                    &state.query,
                    query_entities(&state.query),
                    &state.kbs.iter().map(String::as_str).collect::<Vec<_>>(),
                    state.budgets.bfrs,
                ),
            },
            "trace" => Action::InvokeDfrs { task: Self::dfrs_task(state) },
            "tabulate" => {
                let input = state.findings.tables.last().cloned().unwrap_or_else(|| "bfrs-1/screening.csv".into());
                Action::AnalyzeWorkspace {
                    spec: AnalysisSpec::Aggregate { input, group_by: "sources".into(), output: "analysis/by_source.csv".into() },
                }
            }
            "record" => Action::UpdateGraph { batch: graph_batch(&state.findings, state.log().len() as u64) },
            "retrieve" => {
                let mut seeds: Vec<String> = query_pmids(&state.query).iter().map(|p| format!("PMID:{p}")).collect();
                seeds.extend(gene_symbols(&state.query));
                seeds.extend(state.findings.screened.iter().filter(|s| s.kept).map(|s| s.name.clone()));
                let mut seen = BTreeSet::new();
                seeds.retain(|s| seen.insert(s.clone()));
                Action::RetrieveGraph { seeds, depth: 1 }
            }
            "answer" => Action::Finalize { answer: state.findings.answer(&state.query) },
            _ => return Ok(None),
        };
        Ok(Some(action))
    }

    fn score_relevance(&self, candidate: &str, target: &str) -> f64 {
        lexical_relevance(candidate, target)
    }
}

const PLANNER_PROMPT: &str = "You coordinate a biomedical investigation. Reply with a numbered checklist of \
short steps, one per line, each beginning with one of: Survey, Tabulate, Trace, Record, Retrieve, Answer.";

const ACTOR_PROMPT: &str = "You coordinate a breadth-first knowledge-base survey agent and a depth-first literature \
agent under fixed call budgets, keep a shared evidence graph, and track a checklist plan. Reply with a JSON object \
{\"action\": {...}} naming exactly one action, or a JSON object without \"action\" once the question is answered.";

/// Oracle reached over a chat-completion style HTTP endpoint.
///
/// Planning and action choice go over the wire; relevance scoring stays lexical.
pub struct HttpOracle {
    endpoint: String,
    model: String,
    transport: Arc<dyn Transport>,
    attempts: u32,
}

impl HttpOracle {
    pub fn new(endpoint: &str, transport: Arc<dyn Transport>) -> Self {
        Self { endpoint: endpoint.to_string(), model: "default".into(), transport, attempts: 3 }
    }

    pub fn with_model(mut self, model: &str) -> Self {
        self.model = model.to_string();
        self
    }

    pub fn with_attempts(mut self, attempts: u32) -> Self {
        self.attempts = attempts.max(1);
        self
    }

    /// Sends one system+user exchange and returns the assistant content.
    pub fn complete(&self, system: &str, user: &str) -> Result<String, AgentError> {
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let req = HttpRequest::post_json(self.endpoint.clone(), body.to_string());
        let mut last = String::new();
        for _ in 0..self.attempts {
            match self.transport.send(&req) {
                Ok(resp) if resp.is_success() => {
                    let v: Value = serde_json::from_str(&resp.body)
                        .map_err(|e| AgentError::OracleUnavailable(format!("bad reply: {e}")))?;
                    return v
                        .pointer("/choices/0/message/content")
                        .and_then(Value::as_str)
                        .map(str::to_string)
                        .ok_or_else(|| AgentError::OracleUnavailable("reply has no message content".into()));
                }
                Ok(resp) => last = format!("status {}", resp.status),
                Err(e) => last = e.to_string(),
            }
        }
        Err(AgentError::OracleUnavailable(format!("{} after {} attempt(s): {last}", self.endpoint, self.attempts)))
    }
}

fn strip_checklist_marker(line: &str) -> &str {
    let l = line.trim().trim_start_matches(|c: char| c.is_ascii_digit()).trim_start_matches(['.', ')', '-', '*']);
    let l = l.trim_start();
    l.strip_prefix("[ ]").unwrap_or(l).trim()
}

impl DecisionOracle for HttpOracle {
    fn plan(&self, query: &str) -> Result<PlanChecklist, AgentError> {
        let content = self.complete(PLANNER_PROMPT, query)?;
        let steps: Vec<&str> = content.lines().map(strip_checklist_marker).filter(|l| !l.is_empty()).collect();
        if steps.is_empty() {
            return Err(AgentError::OracleUnavailable("empty plan".into()));
        }
        Ok(PlanChecklist::new(steps))
    }

    fn choose_action(&self, state: &OrchestratorState, observation: &Observation) -> Result<Option<Action>, AgentError> {
        let user = json!({
            "query": state.query,
            "plan": state.plan.render(),
            "budgets": state.budgets,
            "knowledge_bases": state.kbs,
            "observation": observation,
        });
        let content = self.complete(ACTOR_PROMPT, &user.to_string())?;
        let Ok(v) = serde_json::from_str::<Value>(content.trim()) else {
            return Ok(None);
        };
        match v.get("action") {
            None | Some(Value::Null) => Ok(None),
            Some(a) => serde_json::from_value(a.clone())
                .map(Some)
                .map_err(|e| AgentError::OracleUnavailable(format!("unreadable action: {e}"))),
        }
    }

    fn score_relevance(&self, candidate: &str, target: &str) -> f64 {
        lexical_relevance(candidate, target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::{HttpResponse, MockTransport};

    #[test]
    fn overlap_scoring() {
        assert_eq!(lexical_relevance("TP53", "role of TP53 in cancer"), 1.0);
        assert_eq!(lexical_relevance("tumor protein p53 | TP53 | 7157", "TP53 cancer"), 1.0);
        assert_eq!(lexical_relevance("MDM2", "TP53 cancer"), 0.0);
        assert!((lexical_relevance("breast cancer risk", "cancer drugs") - 0.5).abs() < 1e-12);
        assert_eq!(lexical_relevance("anything", "the of"), 0.0);
    }

    #[test]
    fn query_parsing() {
        assert_eq!(gene_symbols("Does TP53 AND MDM2 affect TP53 targets?"), vec!["TP53", "MDM2"]);
        assert_eq!(query_pmids("see PMID:12 and PMID 34, PMID:12"), vec![12, 34]);
        let e = query_entities("psoriasis?");
        assert_eq!(e[0].kind, EntityKind::Disease);
        assert_eq!(e[0].name, "psoriasis");
    }

    #[test]
    fn frontier_tie_break() {
        let nodes = vec![
            FrontierNode::Paper { pmid: 9 },
            FrontierNode::Entity { name: "TNF".into(), entity_type: "GENE".into() },
            FrontierNode::Paper { pmid: 3 },
        ];
        let picked = DefaultOracle.select_frontier(&nodes, "TNF signalling", 2);
        assert_eq!(picked[0], nodes[1]);
        assert_eq!(picked[1], FrontierNode::Paper { pmid: 3 });
    }

    #[test]
    fn http_protocol() {
        let reply = json!({"choices": [{"message": {"role": "assistant", "content": "1. [ ] Survey genes\n2. [ ] Answer"}}]});
        let t = Arc::new(
            MockTransport::new()
                .route("plan", vec![Ok(HttpResponse::status(503)), Ok(HttpResponse::ok(reply.to_string()))])
                .route("down", vec![Ok(HttpResponse::status(500))]),
        );
        let o = HttpOracle::new("http://oracle.test/plan", t.clone());
        let p = o.plan("q").unwrap();
        assert_eq!(p.steps.len(), 2);
        assert_eq!(p.steps[0].text, "Survey genes");
        let sent: Value = serde_json::from_str(t.calls()[1].body.as_deref().unwrap()).unwrap();
        assert_eq!(sent["messages"][0]["role"], "system");
        assert_eq!(sent["messages"][1]["content"], "q");
        let down = HttpOracle::new("http://oracle.test/down", t.clone());
        assert!(matches!(down.plan("q"), Err(AgentError::OracleUnavailable(_))));
        assert_eq!(t.hits("down"), 3);
    }
}
