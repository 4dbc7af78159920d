use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::federation::{EntityKind, EntityRef, FederationClient, FederationError, FetchResult, QuerySpec, RelatedEntity};

/// Federation operations the research agents rely on.
pub trait KnowledgeSource: Send + Sync {
    fn supports(&self, source: &str, kind: EntityKind) -> bool;
    fn search(&self, spec: &QuerySpec) -> Result<FetchResult, FederationError>;
    fn related(&self, entity: &EntityRef, predicate: &str) -> Result<Vec<RelatedEntity>, FederationError>;
    fn citations(&self, pmid: u64) -> Result<Vec<u64>, FederationError>;
}

impl KnowledgeSource for FederationClient {
    fn supports(&self, source: &str, kind: EntityKind) -> bool {
        self.registry().get(source).is_ok_and(|s| s.supports(kind))
    }

    fn search(&self, spec: &QuerySpec) -> Result<FetchResult, FederationError> {
        self.search_entities_unified(spec)
    }

    fn related(&self, entity: &EntityRef, predicate: &str) -> Result<Vec<RelatedEntity>, FederationError> {
        self.find_related_entities(entity, predicate)
    }

    fn citations(&self, pmid: u64) -> Result<Vec<u64>, FederationError> {
        FederationClient::citations(self, pmid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub seq: usize,
    pub agent: String,
    pub op: String,
    pub target: String,
    pub outcome: String,
}

/// Append-only record of every federation invocation made by agents.
#[derive(Debug, Default)]
pub struct CallLog {
    records: Mutex<Vec<CallRecord>>,
}

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, agent: &str, op: &str, target: &str, outcome: &str) -> CallRecord {
        let mut r = self.records.lock().expect("call log");
        let rec = CallRecord {
            seq: r.len(),
            agent: agent.to_string(),
            op: op.to_string(),
            target: target.to_string(),
            outcome: outcome.to_string(),
        };
        r.push(rec.clone());
        rec
    }

    pub fn records(&self) -> Vec<CallRecord> {
        self.records.lock().expect("call log").clone()
    }

    pub fn count_for(&self, agent: &str) -> usize {
        self.records.lock().expect("call log").iter().filter(|r| r.agent == agent).count()
    }
}

/// Knowledge source that refuses calls once `budget` invocations were made.
pub struct BudgetedSource<'a> {
    inner: &'a dyn KnowledgeSource,
    log: &'a CallLog,
    agent: String,
    remaining: usize,
    used: usize,
    calls: Vec<CallRecord>,
}

impl<'a> BudgetedSource<'a> {
    pub fn new(inner: &'a dyn KnowledgeSource, log: &'a CallLog, agent: &str, budget: usize) -> Self {
        Self { inner, log, agent: agent.to_string(), remaining: budget, used: 0, calls: Vec::new() }
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn used(&self) -> usize {
        self.used
    }

    /// Calls made through this wrapper, in order.
    pub fn calls(&self) -> &[CallRecord] {
        &self.calls
    }

    pub fn supports(&self, source: &str, kind: EntityKind) -> bool {
        self.inner.supports(source, kind)
    }

    fn invoke<T>(
        &mut self,
        op: &str,
        target: &str,
        f: impl FnOnce(&dyn KnowledgeSource) -> Result<T, FederationError>,
        count: impl Fn(&T) -> usize,
    ) -> Result<Result<T, FederationError>, AgentError> {
        if self.remaining == 0 {
            return Err(AgentError::BudgetExhausted);
        }
        self.remaining -= 1;
        self.used += 1;
        let r = f(self.inner);
        let outcome = match &r {
            Ok(v) => format!("ok {}", count(v)),
            Err(e) => format!("failed: {e}"),
        };
        let rec = self.log.push(&self.agent, op, target, &outcome);
        self.calls.push(rec);
        Ok(r)
    }

    pub fn search(&mut self, spec: &QuerySpec) -> Result<Result<FetchResult, FederationError>, AgentError> {
        let target = format!("{} {:?} via {}", spec.kind, spec.query, spec.sources.join(","));
        self.invoke("search", &target, |k| k.search(spec), |r| r.records.len())
    }

    pub fn related(
        &mut self,
        entity: &EntityRef,
        predicate: &str,
    ) -> Result<Result<Vec<RelatedEntity>, FederationError>, AgentError> {
        let target = format!("{} {predicate}", entity.annotation_id().unwrap_or_else(|_| entity.name.clone()));
        self.invoke("related", &target, |k| k.related(entity, predicate), Vec::len)
    }

    pub fn citations(&mut self, pmid: u64) -> Result<Result<Vec<u64>, FederationError>, AgentError> {
        self.invoke("citations", &format!("PMID:{pmid}"), |k| k.citations(pmid), Vec::len)
    }
}
