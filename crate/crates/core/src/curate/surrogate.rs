//! Surrogate-endpoint items from drug records and pathway traversal.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::mcq::{seeded_rng, DraftOption, McqItem, TaskType};
use super::CurateError;
use crate::pathway::{KeggFlatRecord, SignedPathwayGraph, Topology};

pub const MIN_OPTIONS: usize = 6;
pub const MAX_OPTIONS: usize = 10;
pub const MAX_CORRECT: usize = 3;
pub const WEAK_OPTIONS: usize = 2;
pub const POOL_DRAWS: usize = 2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessEntry {
    pub markers: Vec<String>,
    pub gain2: Vec<String>,
    pub gain1: Vec<String>,
}

/// Biological-process marker sets and endpoint strategy templates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateLibrary {
    pub max_depth: usize,
    pub proximal_depth: usize,
    pub processes: BTreeMap<String, ProcessEntry>,
    pub proximal: Vec<String>,
    pub proximal_generic: String,
    pub weak: Vec<String>,
}

impl SurrogateLibrary {
    pub fn builtin() -> &'static SurrogateLibrary {
        static L: OnceLock<SurrogateLibrary> = OnceLock::new();
        L.get_or_init(|| serde_json::from_str(crate::data::SURROGATE_LIBRARY).expect("bundled surrogate library"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryEntry {
    pub keywords: Vec<String>,
    pub processes: Vec<String>,
    pub strategies: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContextKeywords {
    pub order: Vec<ContextCategory>,
    pub categories: BTreeMap<ContextCategory, CategoryEntry>,
}

impl ContextKeywords {
    pub fn builtin() -> &'static ContextKeywords {
        static K: OnceLock<ContextKeywords> = OnceLock::new();
        K.get_or_init(|| serde_json::from_str(crate::data::CONTEXT_KEYWORDS).expect("bundled context keywords"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextCategory {
    Cancer,
    Inflammation,
    Metabolic,
    Cardiovascular,
    Neurology,
    Other,
}

impl fmt::Display for ContextCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("category serializes");
        f.write_str(s.as_str().unwrap_or("other"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceField {
    CommentEfficacy,
    Disease,
    Class,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TherapeuticContext {
    pub category: ContextCategory,
    pub field: EvidenceField,
}

pub fn categorize_context(record: &KeggFlatRecord) -> TherapeuticContext {
    categorize_context_with(record, ContextKeywords::builtin())
}

/// Keyword heuristics over COMMENT/EFFICACY, then DISEASE, then CLASS.
pub fn categorize_context_with(record: &KeggFlatRecord, kw: &ContextKeywords) -> TherapeuticContext {
    let fields = [
        (EvidenceField::CommentEfficacy, format!("{} {}", record.comment, record.efficacy)),
        (EvidenceField::Disease, record.diseases.join(" ")),
        (EvidenceField::Class, record.classes.join(" ")),
    ];
    for (field, text) in fields {
        let text = text.to_lowercase();
        for cat in &kw.order {
            let Some(entry) = kw.categories.get(cat) else { continue };
            if entry.keywords.iter().any(|k| text.contains(&k.to_lowercase())) {
                return TherapeuticContext { category: *cat, field };
            }
        }
    }
    TherapeuticContext {
        category: ContextCategory::Other,
        field: EvidenceField::None,
    }
}

/// Mapped targets and undirected BFS depths around them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetNeighborhood {
    pub targets: Vec<usize>,
    pub depth: BTreeMap<usize, usize>,
}

pub fn map_targets(record: &KeggFlatRecord, g: &SignedPathwayGraph) -> Vec<usize> {
    let mut out = BTreeSet::new();
    for t in &record.targets {
        let by_id = t.gene_ids.iter().find_map(|id| g.find_by_kegg_id(id));
        let by_name = || {
            let name = t.name.split(" (").next().unwrap_or(&t.name).trim();
            g.index_of(name)
        };
        if let Some(i) = by_id.or_else(by_name) {
            out.insert(i);
        }
    }
    out.into_iter().collect()
}

/// Breadth-first traversal along both edge directions from all targets.
pub fn traverse(
    record: &KeggFlatRecord,
    g: &SignedPathwayGraph,
    max_depth: usize,
) -> Result<TargetNeighborhood, CurateError> {
    let targets = map_targets(record, g);
    if targets.is_empty() || record.pathways.is_empty() {
        return Err(CurateError::NoMappedTarget(record.accession.clone()));
    }
    let mut depth = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &t in &targets {
        depth.insert(t, 0);
        queue.push_back(t);
    }
    while let Some(v) = queue.pop_front() {
        let d = depth[&v];
        if d == max_depth {
            continue;
        }
        for &w in g.successors(v).iter().chain(g.predecessors(v)) {
            if let std::collections::btree_map::Entry::Vacant(e) = depth.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    Ok(TargetNeighborhood { targets, depth })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessMatch {
    pub process: String,
    pub depth: usize,
    pub markers: Vec<String>,
}

pub fn infer_downstream_processes(
    record: &KeggFlatRecord,
    g: &SignedPathwayGraph,
) -> Result<Vec<ProcessMatch>, CurateError> {
    let lib = SurrogateLibrary::builtin();
    let hood = traverse(record, g, lib.max_depth)?;
    Ok(match_processes(&hood, g, lib))
}

/// Process matches ordered by minimum depth, then name.
pub fn match_processes(
    hood: &TargetNeighborhood,
    g: &SignedPathwayGraph,
    lib: &SurrogateLibrary,
) -> Vec<ProcessMatch> {
    let reached: BTreeMap<&str, usize> = hood
        .depth
        .iter()
        .map(|(&n, &d)| (g.label(n), d))
        .collect();
    let mut out: Vec<ProcessMatch> = lib
        .processes
        .iter()
        .filter_map(|(name, entry)| {
            let hits: Vec<(&String, usize)> = entry
                .markers
                .iter()
                .filter_map(|m| reached.get(m.as_str()).map(|&d| (m, d)))
                .collect();
            let depth = hits.iter().map(|(_, d)| *d).min()?;
            Some(ProcessMatch {
                process: name.clone(),
                depth,
                markers: hits.into_iter().map(|(m, _)| m.clone()).collect(),
            })
        })
        .collect();
    out.sort_by(|a, b| a.depth.cmp(&b.depth).then_with(|| a.process.cmp(&b.process)));
    out
}

/// Gene symbols at depth 1..proximal_depth, nearest first.
pub fn proximal_genes(hood: &TargetNeighborhood, g: &SignedPathwayGraph, lib: &SurrogateLibrary) -> Vec<String> {
    let mut v: Vec<(usize, String)> = hood
        .depth
        .iter()
        .filter(|(_, &d)| d >= 1 && d < lib.proximal_depth)
        .filter(|(&n, _)| g.node(n).kind == crate::pathway::NodeKind::Gene)
        .map(|(&n, &d)| (d, g.label(n).to_string()))
        .collect();
    v.sort();
    v.into_iter().map(|(_, s)| s).collect()
}

fn identifier_pattern() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"(?i)\b(?:D\d{5}|C\d{5}|hsa:?\d+)\b").expect("valid pattern"))
}

/// Removes database identifiers and the punctuation they leave behind.
pub fn strip_identifiers(text: &str) -> String {
    let s = identifier_pattern().replace_all(text, "");
    let s = s.replace("()", "").replace("[]", "");
    s.lines()
        .map(|l| {
            l.split_whitespace()
                .collect::<Vec<_>>()
                .join(" ")
                .replace(" ,", ",")
                .replace(" ;", ";")
                .replace(" .", ".")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn has_identifier(text: &str) -> bool {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"D\d{5}|C\d{5}|hsa\d+").expect("valid pattern"))
        .is_match(text)
}

/// Gain-2 strategies for a drug: matched processes admitted by the context,
/// nearest first, then the context's own strategies.
pub fn correct_strategies(
    processes: &[ProcessMatch],
    context: &TherapeuticContext,
    lib: &SurrogateLibrary,
    kw: &ContextKeywords,
) -> Vec<String> {
    let entry = kw.categories.get(&context.category);
    let admitted = |p: &str| entry.is_none_or(|e| e.processes.iter().any(|q| q == p));
    let mut out: Vec<String> = Vec::new();
    let from_processes = processes
        .iter()
        .filter(|m| admitted(&m.process))
        .filter_map(|m| lib.processes.get(&m.process))
        .flat_map(|e| e.gain2.iter().cloned());
    let from_context = entry.into_iter().flat_map(|e| e.strategies.iter().cloned());
    for s in from_processes.chain(from_context) {
        let s = strip_identifiers(&s);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out.truncate(MAX_CORRECT);
    out
}

fn item_stem(record: &KeggFlatRecord) -> String {
    let disease = record
        .diseases
        .first()
        .cloned()
        .unwrap_or_else(|| "its indication".to_string());
    let class = record
        .classes
        .first()
        .cloned()
        .or_else(|| record.efficacy.split(',').next().map(|s| s.trim().to_string()))
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "agent".to_string());
    let text = format!(
        "Drug: {} ({})\nIndication: {disease}\nSuggest plausible surrogate endpoint strategies for a new {class} in {disease}. \
         Pick biomarkers that can be measured within 2 to 12 weeks and that connect the drug's pharmacodynamic effect to clinical improvement.",
        record.name, record.accession
    );
    strip_identifiers(&text)
}

#[derive(Debug, Clone)]
pub struct SurrogateInputs<'a> {
    pub record: &'a KeggFlatRecord,
    pub processes: &'a [ProcessMatch],
    pub context: TherapeuticContext,
    /// Gene symbols within the proximal depth of the targets.
    pub proximal: &'a [String],
    /// Gain-2 strategies of other drugs.
    pub cross_drug_pool: &'a [String],
}

pub fn build_surrogate_item(inputs: &SurrogateInputs, seed: u64) -> Result<McqItem, CurateError> {
    build_surrogate_item_with(inputs, seed, SurrogateLibrary::builtin(), ContextKeywords::builtin())
}

pub fn build_surrogate_item_with(
    inputs: &SurrogateInputs,
    seed: u64,
    lib: &SurrogateLibrary,
    kw: &ContextKeywords,
) -> Result<McqItem, CurateError> {
    let correct = correct_strategies(inputs.processes, &inputs.context, lib, kw);
    if correct.len() < 2 {
        return Err(CurateError::InsufficientOptions(format!(
            "{} gain-2 strategies for {}",
            correct.len(),
            inputs.record.accession
        )));
    }
    let mut texts: BTreeSet<String> = correct.iter().cloned().collect();
    let mut drafts: Vec<DraftOption> = correct.iter().map(|t| DraftOption::plain(t.clone(), 2)).collect();
    let mut push = |text: String, gain: u8, drafts: &mut Vec<DraftOption>| -> bool {
        let text = strip_identifiers(&text);
        if texts.insert(text.clone()) {
            drafts.push(DraftOption::plain(text, gain));
            true
        } else {
            false
        }
    };

    let weak: Vec<String> = inputs
        .processes
        .iter()
        .filter_map(|m| lib.processes.get(&m.process))
        .flat_map(|e| e.gain1.iter().cloned())
        .take(1)
        .chain(lib.weak.iter().cloned())
        .collect();
    let mut n_weak = 0;
    for w in weak {
        if n_weak == WEAK_OPTIONS {
            break;
        }
        if push(w, 1, &mut drafts) {
            n_weak += 1;
        }
    }

    let admitted: BTreeSet<String> = lib
        .processes
        .values()
        .flat_map(|e| e.gain2.iter())
        .chain(kw.categories.values().flat_map(|e| e.strategies.iter()))
        .map(|s| strip_identifiers(s))
        .filter(|s| correct.contains(s))
        .collect();
    let mut pool: Vec<String> = inputs
        .cross_drug_pool
        .iter()
        .map(|s| strip_identifiers(s))
        .filter(|s| !correct.contains(s) && !admitted.contains(s))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if pool.is_empty() {
        return Err(CurateError::PoolEmpty);
    }
    let mut rng = seeded_rng(seed ^ 0x5eed);
    pool.shuffle(&mut rng);
    let mut n_zero = 0;
    for p in pool.into_iter().take(POOL_DRAWS) {
        if push(p, 0, &mut drafts) {
            n_zero += 1;
        }
    }
    for (i, template) in lib.proximal.iter().enumerate() {
        let text = if template.contains("{gene}") {
            match inputs.proximal.get(i.saturating_sub(1)) {
                Some(gene) => template.replace("{gene}", gene),
                None => lib.proximal_generic.clone(),
            }
        } else {
            template.clone()
        };
        if push(text, 0, &mut drafts) {
            n_zero += 1;
        }
    }

    if n_weak < 2 || n_zero < 2 || !(MIN_OPTIONS..=MAX_OPTIONS).contains(&drafts.len()) {
        return Err(CurateError::InsufficientOptions(format!(
            "{} options ({} weak, {} distractors)",
            drafts.len(),
            n_weak,
            n_zero
        )));
    }
    let mut metadata = BTreeMap::new();
    metadata.insert("drug".into(), json!(inputs.record.name));
    metadata.insert("context".into(), json!(inputs.context.category.to_string()));
    metadata.insert(
        "processes".into(),
        json!(inputs
            .processes
            .iter()
            .map(|m| (m.process.clone(), m.depth))
            .collect::<BTreeMap<_, _>>()),
    );
    metadata.insert("seed".into(), json!(seed));
    let id = format!("surrogate-{}-{seed}", inputs.record.accession);
    McqItem::assemble(id, TaskType::Surrogate, item_stem(inputs.record), drafts, metadata, seed)
}

/// Two-pass curation over many drugs: first collect each drug's gain-2
/// strategies, then build items using the other drugs' strategies as
/// distractors.
pub fn curate_drugs(
    records: &[KeggFlatRecord],
    g: &SignedPathwayGraph,
    seed: u64,
) -> (Vec<McqItem>, Vec<(String, CurateError)>) {
    let lib = SurrogateLibrary::builtin();
    let kw = ContextKeywords::builtin();
    let mut prepared = Vec::new();
    let mut skipped = Vec::new();
    for r in records {
        match traverse(r, g, lib.max_depth) {
            Ok(hood) => {
                let processes = match_processes(&hood, g, lib);
                let context = categorize_context_with(r, kw);
                let proximal = proximal_genes(&hood, g, lib);
                let correct = correct_strategies(&processes, &context, lib, kw);
                prepared.push((r, processes, context, proximal, correct));
            }
            Err(e) => skipped.push((r.accession.clone(), e)),
        }
    }
    let mut items = Vec::new();
    for (i, (r, processes, context, proximal, _)) in prepared.iter().enumerate() {
        let pool: Vec<String> = prepared
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, p)| p.4.iter().cloned())
            .collect();
        let inputs = SurrogateInputs {
            record: r,
            processes,
            context: *context,
            proximal,
            cross_drug_pool: &pool,
        };
        match build_surrogate_item(&inputs, seed.wrapping_add(i as u64)) {
            Ok(item) => items.push(item),
            Err(e) => skipped.push((r.accession.clone(), e)),
        }
    }
    (items, skipped)
}
