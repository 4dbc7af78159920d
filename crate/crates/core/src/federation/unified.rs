use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::client::ParsedResponse;
use super::query::{EntityKind, Predicate, QuerySpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XrefId {
    pub id: String,
    pub sources: Vec<String>,
}

/// One source hit enriched with identifiers from every hit sharing an id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedRecord {
    pub name: String,
    pub kind: EntityKind,
    /// Namespace to identifiers; more than one id in a namespace is a
    /// cross-source conflict, kept side by side with its sources.
    pub xrefs: BTreeMap<String, Vec<XrefId>>,
    pub sources: Vec<String>,
    pub origin: String,
    pub rank: usize,
    pub cluster: usize,
    pub raw: Value,
}

impl UnifiedRecord {
    pub fn single(
        source: &str,
        kind: EntityKind,
        name: &str,
        xrefs: BTreeMap<String, BTreeSet<String>>,
        rank: usize,
        raw: Value,
    ) -> Self {
        Self {
            name: name.to_string(),
            kind,
            xrefs: xrefs
                .into_iter()
                .map(|(ns, ids)| {
                    let v = ids
                        .into_iter()
                        .map(|id| XrefId { id, sources: vec![source.to_string()] })
                        .collect();
                    (ns, v)
                })
                .collect(),
            sources: vec![source.to_string()],
            origin: source.to_string(),
            rank,
            cluster: 0,
            raw,
        }
    }

    pub fn first_id(&self, ns: &str) -> Option<&str> {
        self.xrefs.get(ns).and_then(|v| v.first()).map(|x| x.id.as_str())
    }

    pub fn ids(&self, ns: &str) -> Vec<&str> {
        self.xrefs.get(ns).map(|v| v.iter().map(|x| x.id.as_str()).collect()).unwrap_or_default()
    }

    /// Namespaces holding more than one identifier.
    pub fn conflicts(&self) -> Vec<&str> {
        self.xrefs.iter().filter(|(_, v)| v.len() > 1).map(|(k, _)| k.as_str()).collect()
    }

    pub fn xref_string(&self) -> String {
        self.xrefs
            .iter()
            .flat_map(|(ns, ids)| ids.iter().map(move |x| format!("{ns}:{}", x.id)))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SourceStatus {
    Ok { count: usize },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchResult {
    pub kind: EntityKind,
    pub query: String,
    pub records: Vec<UnifiedRecord>,
    pub summary: String,
    pub manifest: Vec<PathBuf>,
    pub status: Vec<(String, SourceStatus)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRef {
    pub name: String,
    /// Literature annotation type such as GENE or DISEASE.
    pub entity_type: Option<String>,
    pub id: Option<String>,
}

impl EntityRef {
    pub fn typed(entity_type: &str, name: &str) -> Self {
        Self { name: name.to_string(), entity_type: Some(entity_type.to_string()), id: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatedEntity {
    pub entity: EntityRef,
    pub predicate: Predicate,
    pub pmids: Vec<u64>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Flattens per-source records (already in source-priority order) and links
/// records that share any identifier, giving each the union of identifiers
/// and attributions of its group.
pub(crate) fn merge_records(per_source: Vec<ParsedResponse>) -> Vec<UnifiedRecord> {
    let mut records: Vec<UnifiedRecord> = per_source.into_iter().flat_map(|p| p.records).collect();
    let n = records.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut owner: HashMap<(String, String), usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        for (ns, ids) in &r.xrefs {
            for x in ids {
                match owner.get(&(ns.clone(), x.id.clone())) {
                    Some(&j) => {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        if a != b {
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                    None => {
                        owner.insert((ns.clone(), x.id.clone()), i);
                    }
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut cluster_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &r in &roots {
        let next = cluster_of.len();
        cluster_of.entry(r).or_insert(next);
    }
    let mut merged_xrefs: HashMap<usize, BTreeMap<String, Vec<XrefId>>> = HashMap::new();
    let mut merged_sources: HashMap<usize, Vec<String>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let root = roots[i];
        let srcs = merged_sources.entry(root).or_default();
        for s in &r.sources {
            if !srcs.contains(s) {
                srcs.push(s.clone());
            }
        }
        let xm = merged_xrefs.entry(root).or_default();
        for (ns, ids) in &r.xrefs {
            let slot = xm.entry(ns.clone()).or_default();
            for x in ids {
                match slot.iter_mut().find(|y| y.id == x.id) {
                    Some(y) => {
                        for s in &x.sources {
                            if !y.sources.contains(s) {
                                y.sources.push(s.clone());
                            }
                        }
                    }
                    None => slot.push(x.clone()),
                }
            }
        }
    }
    for (i, r) in records.iter_mut().enumerate() {
        let root = roots[i];
        r.xrefs = merged_xrefs[&root].clone();
        r.sources = merged_sources[&root].clone();
        r.cluster = cluster_of[&root];
    }
    records
}

pub(crate) fn summarize(
    spec: &QuerySpec,
    records: &[UnifiedRecord],
    status: &[(String, SourceStatus)],
    manifest: &[PathBuf],
) -> String {
    let ok = status.iter().filter(|(_, s)| matches!(s, SourceStatus::Ok { .. })).count();
    let mut s = format!(
        "Found {} {} result{} for \"{}\" from {}/{} sources.\n",
        records.len(),
        spec.kind,
        if records.len() == 1 { "" } else { "s" },
        spec.query,
        ok,
        status.len()
    );
    for (id, st) in status {
        match st {
            SourceStatus::Ok { count } => writeln!(s, "  {id}: {count}").ok(),
            SourceStatus::Failed { reason } => writeln!(s, "  {id}: failed ({reason})").ok(),
        };
    }
    if !records.is_empty() {
        s.push_str("Preview:\n");
        for (i, r) in records.iter().take(5).enumerate() {
            writeln!(s, "  {}. {} [{}] ({})", i + 1, r.name, r.xref_string(), r.sources.join(", ")).ok();
        }
    }
    for p in manifest {
        writeln!(s, "Saved {}", p.display()).ok();
    }
    s
}
