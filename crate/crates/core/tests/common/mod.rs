#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use kgresearch_core::agents::KnowledgeSource;
use kgresearch_core::curate::ebm::{render_review_xml, split_doi, GapPrediction, ReviewVersion};
use kgresearch_core::curate::mcq::seeded_rng;
use kgresearch_core::federation::{
    EntityKind, EntityRef, FederationError, FetchResult, QuerySpec, RelatedEntity, UnifiedRecord,
};
use kgresearch_core::pathway::{ReactionGraph, SignedPathwayGraph, Topology};
use rand::Rng;

pub mod criteria;

// ---------------------------------------------------------------------------
// Random signed digraphs and brute-force oracles

/// Random signed digraph on `n` genes `G0..`, with edge probability `p`.
pub fn random_signed_graph(seed: u64, n: usize, p: f64) -> SignedPathwayGraph {
    let mut rng = seeded_rng(seed);
    let mut g = SignedPathwayGraph::new(format!("path:r{seed}"), "random");
    for i in 0..n {
        g.add_gene(&format!("G{i}"));
    }
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(p) {
                let w = if rng.random_bool(0.5) { 1 } else { -1 };
                g.add_edge(a, b, w, "activation");
            }
        }
    }
    g
}

/// Sum of signs and count over all simple paths `start -> t` of at most
/// `max_len` edges, for each endpoint `t != start`.
pub fn brute_polarity(g: &SignedPathwayGraph, start: usize, endpoints: &[usize], max_len: usize) -> (i64, usize) {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        g: &SignedPathwayGraph,
        v: usize,
        t: usize,
        depth: usize,
        max_len: usize,
        sign: i64,
        on: &mut Vec<bool>,
        acc: &mut (i64, usize),
    ) {
        if depth == max_len {
            return;
        }
        for &w in g.successors(v) {
            if on[w] {
                continue;
            }
            let s = sign * g.weight(v, w).unwrap() as i64;
            if w == t {
                acc.0 += s;
                acc.1 += 1;
                continue;
            }
            on[w] = true;
            walk(g, w, t, depth + 1, max_len, s, on, acc);
            on[w] = false;
        }
    }
    let targets: BTreeSet<usize> = endpoints.iter().copied().filter(|&t| t != start).collect();
    let mut acc = (0i64, 0usize);
    for t in targets {
        let mut on = vec![false; g.node_count()];
        on[start] = true;
        walk(g, start, t, 0, max_len, 1, &mut on, &mut acc);
    }
    acc
}

/// All-pairs hop distances by Floyd-Warshall.
pub fn all_pairs_distance(g: &impl Topology) -> Vec<Vec<Option<usize>>> {
    let n = g.node_count();
    let mut d = vec![vec![None; n]; n];
    for (v, row) in d.iter_mut().enumerate() {
        row[v] = Some(0);
        for &w in g.successors(v) {
            row[w] = Some(1);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

/// Directed betweenness from pairwise shortest-path counts:
/// `sum_{s != v != t} sigma_sv * sigma_vt / sigma_st` over `v` on a shortest `s-t` path.
pub fn brute_betweenness(g: &impl Topology) -> Vec<f64> {
    let n = g.node_count();
    let d = all_pairs_distance(g);
    let mut sigma = vec![vec![0f64; n]; n];
    for s in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&v| d[s][v].is_some()).collect();
        order.sort_by_key(|&v| d[s][v]);
        sigma[s][s] = 1.0;
        for &v in &order {
            if v == s {
                continue;
            }
            let dv = d[s][v].unwrap();
            sigma[s][v] = (0..n)
                .filter(|&u| d[s][u] == Some(dv - 1) && g.successors(u).contains(&v))
                .map(|u| sigma[s][u])
                .sum();
        }
    }
    let mut bc = vec![0.0; n];
    for s in 0..n {
        for t in 0..n {
            let Some(dst) = d[s][t] else { continue };
            if s == t {
                continue;
            }
            for v in 0..n {
                if v == s || v == t {
                    continue;
                }
                if let (Some(a), Some(b)) = (d[s][v], d[v][t]) {
                    if a + b == dst {
                        bc[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                    }
                }
            }
        }
    }
    bc
}

/// Mutual-reachability classes, each sorted, ordered by smallest member.
pub fn brute_scc(g: &impl Topology) -> Vec<Vec<usize>> {
    let d = all_pairs_distance(g);
    let n = g.node_count();
    let mut assigned = vec![false; n];
    let mut out = Vec::new();
    for v in 0..n {
        if assigned[v] {
            continue;
        }
        let comp: Vec<usize> = (0..n).filter(|&w| d[v][w].is_some() && d[w][v].is_some()).collect();
        for &w in &comp {
            assigned[w] = true;
        }
        out.push(comp);
    }
    out
}

/// Nodes at hop distance `1..=k` from `node`, forward or reverse.
pub fn brute_k_step(g: &impl Topology, node: usize, k: usize, upstream: bool) -> BTreeSet<usize> {
    let d = all_pairs_distance(g);
    (0..g.node_count())
        .filter(|&w| w != node)
        .filter(|&w| {
            let dist = if upstream { d[w][node] } else { d[node][w] };
            dist.is_some_and(|x| x <= k)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Curator fixtures

/// Inflammatory pathway with ten candidate genes around one disease endpoint.
pub fn inflammation_pathway() -> SignedPathwayGraph {
    let mut g = SignedPathwayGraph::new("path:hsa_ra", "rheumatoid arthritis");
    for (from, w) in [("TNF", 1), ("IL6", 1), ("IL10", -1), ("TGFB1", -1), ("RPS6", 1), ("ANXA1", -1)] {
        g.add_edge_by_symbol(from, "INFLAMMATION", w);
    }
    g.add_edge_by_symbol("SOCS3", "IL6", -1);
    g.add_edge_by_symbol("PTGER4", "TGFB1", 1);
    g.add_gene("IL1RN");
    g.add_gene("GAPDH");
    g.set_endpoints_by_symbol(&["INFLAMMATION"]).unwrap();
    g
}

/// `C1 -[E1]-> C2 -> C3 -> C4` with a `C2 <-> C5` feedback loop.
pub fn feedback_reactions() -> ReactionGraph {
    let mut rg = ReactionGraph::new();
    let r = rg.add_reaction("1", "rn:R1", false, &["C1"], &["C2"]);
    rg.annotate_enzyme("E1", r);
    rg.add_reaction("2", "rn:R2", false, &["C2"], &["C3"]);
    rg.add_reaction("3", "rn:R3", false, &["C3"], &["C4"]);
    rg.add_reaction("4", "rn:R4", false, &["C2"], &["C5"]);
    rg.add_reaction("5", "rn:R5", false, &["C5"], &["C2"]);
    rg
}

/// Random linear reaction chain with feedback branches annotated by enzyme `E0`.
pub fn random_reactions(seed: u64) -> ReactionGraph {
    let mut rng = seeded_rng(seed);
    let mut rg = ReactionGraph::new();
    let len = rng.random_range(3..8usize);
    let first = rg.add_reaction("0", "rn:R0", false, &["C0"], &["C1"]);
    rg.annotate_enzyme("E0", first);
    for i in 1..len {
        let (a, b) = (format!("C{i}"), format!("C{}", i + 1));
        rg.add_reaction(&i.to_string(), &format!("rn:R{i}"), rng.random_bool(0.2), &[&a], &[&b]);
    }
    let loops = rng.random_range(0..3usize);
    for j in 0..loops {
        let at = rng.random_range(1..=len);
        let side = format!("S{j}");
        let on = format!("C{at}");
        rg.add_reaction(&format!("f{j}a"), &format!("rn:F{j}a"), false, &[&on], &[&side]);
        rg.add_reaction(&format!("f{j}b"), &format!("rn:F{j}b"), false, &[&side], &[&on]);
    }
    rg
}

/// EBM review pair with expected scores computed by hand.
#[derive(Debug, Clone)]
pub struct GapCase {
    pub base: &'static str,
    pub older: &'static [u64],
    pub newer: &'static [u64],
    pub ranked: Vec<u64>,
    pub truth: &'static [u64],
    pub hits: usize,
    pub recall: f64,
}

fn padded(fill: usize, start: u64, tail: &[u64]) -> Vec<u64> {
    (start..start + fill as u64).chain(tail.iter().copied()).collect()
}

pub fn gap_cases() -> Vec<GapCase> {
    let case = |base, older, newer, ranked: Vec<u64>, truth, hits, recall| GapCase {
        base,
        older,
        newer,
        ranked,
        truth,
        hits,
        recall,
    };
    vec![
        case("CD000001", &[1, 2, 3], &[1, 2, 3, 4, 5], vec![4, 9, 5], &[4, 5], 2, 1.0),
        case("CD000002", &[10, 11], &[10, 11, 12, 13, 14, 15], vec![12, 99], &[12, 13, 14, 15], 1, 0.25),
        case("CD000003", &[20], &[20, 21], vec![22, 23], &[21], 0, 0.0),
        // true hit at rank 31 falls outside the cutoff
        case("CD000004", &[30], &[30, 31, 32], padded(30, 1000, &[31]), &[31, 32], 0, 0.0),
        // repeated PMIDs occupy one rank
        case("CD000005", &[40], &[40, 41, 42], [vec![999; 35], vec![41]].concat(), &[41, 42], 1, 0.5),
        // studies dropped by the update are not part of the gap
        case("CD000006", &[50, 51, 52], &[51, 53], vec![50, 53], &[53], 1, 1.0),
        case("CD000007", &[60, 61], &[60, 61, 62, 63, 64], vec![60, 61, 62, 63, 64], &[62, 63, 64], 3, 1.0),
        case("CD000008", &[70], &[70, 71, 72, 73, 74, 75], vec![71, 73, 80, 81], &[71, 72, 73, 74, 75], 2, 0.4),
        // rank 30 is inside the cutoff, rank 31 is not
        case("CD000009", &[90], &[90, 91, 92, 93, 94], padded(29, 2000, &[92, 93]), &[91, 92, 93, 94], 1, 0.25),
        case("CD000010", &[100], &[100, 101], vec![], &[101], 0, 0.0),
    ]
}

pub const GAP_RATE: f64 = 0.7;
pub const MEAN_RECALL: f64 = 0.44;

pub fn review_version(base: &str, version: u32, included: &[u64]) -> ReviewVersion {
    let doi = if version == 1 {
        format!("10.1002/14651858.{base}")
    } else {
        format!("10.1002/14651858.{base}.pub{version}")
    };
    let (base_doi, version) = split_doi(&doi);
    ReviewVersion {
        base_doi,
        version_doi: doi,
        version,
        pmid: Some(30_000_000 + version as u64),
        title: format!("Interventions for condition {base}"),
        objectives: "To assess the effects of the interventions.".into(),
        selection_criteria: "Randomised controlled trials.".into(),
        outcomes: "Mortality & morbidity".into(),
        included: included.iter().copied().collect(),
        excluded: BTreeSet::from([900_000 + version as u64]),
    }
}

/// Writes every case as two review documents and returns the predictions.
pub fn write_gap_corpus(dir: &Path, cases: &[GapCase]) -> Vec<GapPrediction> {
    for c in cases {
        for (v, inc) in [(2, c.older), (3, c.newer)] {
            let r = review_version(c.base, v, inc);
            std::fs::write(dir.join(format!("{}_v{v}.xml", c.base)), render_review_xml(&r)).unwrap();
        }
    }
    cases
        .iter()
        .map(|c| GapPrediction { base_doi: format!("10.1002/14651858.{}", c.base), newer_doi: None, ranked: c.ranked.clone() })
        .collect()
}

// ---------------------------------------------------------------------------
// Scripted knowledge source

/// Deterministic in-memory knowledge source with a citation graph, gene hits
/// per source and literature relations. Sources listed in `failing` error.
#[derive(Debug, Clone, Default)]
pub struct ScriptedKb {
    pub genes: BTreeMap<String, Vec<(String, String)>>,
    pub citations: BTreeMap<u64, Vec<u64>>,
    pub relations: BTreeMap<String, Vec<(String, String, Vec<u64>)>>,
    pub failing: BTreeSet<String>,
    pub publications: Vec<u64>,
}

impl ScriptedKb {
    pub fn random(seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut kb = ScriptedKb::default();
        let genes = ["TP53", "EGFR", "KRAS", "BRCA1", "MYC"];
        let sources = ["biothings", "kegg", "opentargets", "pubtator"];
        for g in genes {
            let mut hits = Vec::new();
            for (i, s) in sources.iter().enumerate() {
                if rng.random_bool(0.75) {
                    hits.push((s.to_string(), format!("{}", 1000 + i)));
                }
            }
            kb.genes.insert(g.to_string(), hits);
            let n = rng.random_range(0..4);
            let rel = (0..n)
                .map(|j| {
                    let partner = genes[rng.random_range(0..genes.len())];
                    let ty = ["GENE", "DISEASE", "CHEMICAL"][j % 3];
                    let pm: Vec<u64> = (0..rng.random_range(1..3)).map(|_| rng.random_range(1..60)).collect();
                    (ty.to_string(), format!("{partner}-{j}"), pm)
                })
                .collect();
            kb.relations.insert(format!("@GENE_{g}"), rel);
        }
        for p in 1..60u64 {
            let k = rng.random_range(0..4);
            let refs: BTreeSet<u64> = (0..k).map(|_| rng.random_range(1..60)).filter(|&r| r != p).collect();
            kb.citations.insert(p, refs.into_iter().collect());
        }
        kb.publications = (0..5).map(|_| rng.random_range(1..60)).collect();
        if rng.random_bool(0.3) {
            kb.failing.insert("kegg".into());
        }
        kb
    }
}

fn fetch(kind: EntityKind, query: &str, records: Vec<UnifiedRecord>) -> FetchResult {
    FetchResult {
        kind,
        query: query.to_string(),
        records,
        summary: String::new(),
        manifest: Vec::new(),
        status: Vec::new(),
    }
}

impl KnowledgeSource for ScriptedKb {
    fn supports(&self, source: &str, kind: EntityKind) -> bool {
        match kind {
            EntityKind::Gene => source != "pubmed",
            EntityKind::Publication => source == "pubmed" || source == "pubtator",
            EntityKind::Disease => source == "pubtator" || source == "opentargets",
            _ => false,
        }
    }

    fn search(&self, spec: &QuerySpec) -> Result<FetchResult, FederationError> {
        let src = spec.sources.first().cloned().unwrap_or_default();
        if self.failing.contains(&src) {
            return Err(FederationError::SourceUnavailable { host: src, attempts: 3, reason: "HTTP 503".into() });
        }
        let records = match spec.kind {
            EntityKind::Publication => self
                .publications
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let xrefs = BTreeMap::from([("pmid".to_string(), BTreeSet::from([p.to_string()]))]);
                    UnifiedRecord::single(&src, spec.kind, &p.to_string(), xrefs, i, serde_json::Value::Null)
                })
                .collect(),
            EntityKind::Gene => self
                .genes
                .get(&spec.query)
                .into_iter()
                .flatten()
                .filter(|(s, _)| *s == src)
                .map(|(s, id)| {
                    let xrefs = BTreeMap::from([("entrez".to_string(), BTreeSet::from([id.clone()]))]);
                    UnifiedRecord::single(s, spec.kind, &spec.query, xrefs, 0, serde_json::Value::Null)
                })
                .collect(),
            _ => {
                let xrefs = BTreeMap::from([("mesh".to_string(), BTreeSet::from(["D009369".to_string()]))]);
                vec![UnifiedRecord::single(&src, spec.kind, &spec.query, xrefs, 0, serde_json::Value::Null)]
            }
        };
        Ok(fetch(spec.kind, &spec.query, records))
    }

    fn related(&self, entity: &EntityRef, predicate: &str) -> Result<Vec<RelatedEntity>, FederationError> {
        let key = entity
            .id
            .clone()
            .unwrap_or_else(|| format!("@{}_{}", entity.entity_type.as_deref().unwrap_or("GENE"), entity.name));
        let pred = predicate.parse()?;
        Ok(self
            .relations
            .get(&key)
            .into_iter()
            .flatten()
            .map(|(ty, name, pmids)| RelatedEntity {
                entity: EntityRef { name: name.clone(), entity_type: Some(ty.clone()), id: Some(format!("@{ty}_{name}")) },
                predicate: pred,
                pmids: pmids.clone(),
            })
            .collect())
    }

    fn citations(&self, pmid: u64) -> Result<Vec<u64>, FederationError> {
        Ok(self.citations.get(&pmid).cloned().unwrap_or_default())
    }
}

/// Every regular file under `root`, keyed by relative path.
pub fn snapshot_dir(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = VecDeque::from([root.to_path_buf()]);
    while let Some(dir) = stack.pop_front() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push_back(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
