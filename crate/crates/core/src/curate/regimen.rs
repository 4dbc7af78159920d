//! Drug-regimen design items from a dose/toxicity corpus.
//!
//! Corpus format (`corpus.json`):
//!
//! ```json
//! {"trials": [{
//!   "trial_id": "NCT0001",
//!   "population": "locally advanced rectal cancer",
//!   "approved_combination": false,
//!   "design": "3+3 escalation",
//!   "drugs": [{"name": "capecitabine", "route": "oral"}],
//!   "dose_levels": [{"level": 1, "doses": {"capecitabine": 825.0},
//!                    "dlts": [{"term": "diarrhea", "count": 1}]}],
//!   "dlt_definitions": ["grade 4 neutropenia lasting over 7 days"],
//!   "mtd": {"capecitabine": 1000.0}
//! }]}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::mcq::{DraftOption, McqItem, TaskType};
use super::CurateError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugRoute {
    pub name: String,
    #[serde(default)]
    pub route: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DltCount {
    pub term: String,
    #[serde(default = "one")]
    pub count: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseLevel {
    pub level: i32,
    #[serde(default)]
    pub doses: BTreeMap<String, f64>,
    #[serde(default)]
    pub dlts: Vec<DltCount>,
}

/// One trial regimen with its dose ladder and toxicity summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimenEvidence {
    pub trial_id: String,
    #[serde(default)]
    pub population: String,
    #[serde(default)]
    pub approved_combination: bool,
    #[serde(default)]
    pub design: Option<String>,
    pub drugs: Vec<DrugRoute>,
    #[serde(default)]
    pub dose_levels: Vec<DoseLevel>,
    #[serde(default)]
    pub dlt_definitions: Vec<String>,
    #[serde(default)]
    pub mtd: BTreeMap<String, f64>,
}

impl RegimenEvidence {
    pub fn drug_keys(&self) -> Vec<String> {
        self.drugs.iter().map(|d| drug_key(&d.name)).collect()
    }

    fn mtd_for(&self, key: &str) -> Option<f64> {
        self.mtd
            .iter()
            .find(|(k, _)| drug_key(k) == key)
            .map(|(_, v)| *v)
            .filter(|v| *v > 0.0)
    }

    fn dose_for(level: &DoseLevel, key: &str) -> Option<f64> {
        level
            .doses
            .iter()
            .find(|(k, _)| drug_key(k) == key)
            .map(|(_, v)| *v)
    }

    /// Case-folded DLT terms observed at least once.
    pub fn dlt_terms(&self) -> BTreeSet<String> {
        self.dose_levels
            .iter()
            .flat_map(|l| &l.dlts)
            .filter(|d| d.count > 0)
            .map(|d| fold_term(&d.term))
            .filter(|t| !t.is_empty())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegimenCorpus {
    pub trials: Vec<RegimenEvidence>,
}

impl RegimenCorpus {
    pub fn from_json(text: &str) -> Result<Self, CurateError> {
        serde_json::from_str(text).map_err(|e| CurateError::Parse(format!("regimen corpus: {e}")))
    }
}

pub fn drug_key(name: &str) -> String {
    name.trim().to_lowercase()
}

fn fold_term(term: &str) -> String {
    term.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotherapyBaseline {
    pub drug: String,
    pub reference_mtd: Option<f64>,
    pub dlt_terms: BTreeSet<String>,
    pub source_trials: Vec<String>,
}

/// Reference MTD and DLT vocabulary per drug from single-agent trials.
pub fn compute_monotherapy_baselines(corpus: &RegimenCorpus) -> BTreeMap<String, MonotherapyBaseline> {
    let mut out: BTreeMap<String, MonotherapyBaseline> = BTreeMap::new();
    for t in corpus.trials.iter().filter(|t| t.drugs.len() == 1) {
        let key = drug_key(&t.drugs[0].name);
        let b = out.entry(key.clone()).or_insert_with(|| MonotherapyBaseline {
            drug: key.clone(),
            reference_mtd: None,
            dlt_terms: BTreeSet::new(),
            source_trials: Vec::new(),
        });
        if let Some(m) = t.mtd_for(&key) {
            b.reference_mtd = Some(b.reference_mtd.map_or(m, |cur| cur.max(m)));
        }
        b.dlt_terms.extend(t.dlt_terms());
        b.source_trials.push(t.trial_id.clone());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseIntensity {
    pub start: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimenFeatures {
    pub trial_id: String,
    pub drugs: Vec<String>,
    pub routes: Vec<String>,
    pub population: String,
    /// Ladder dose relative to the monotherapy reference MTD.
    pub intensities: BTreeMap<String, DoseIntensity>,
    /// Total DLT count per dose level, ascending by level.
    pub dlt_pattern: Vec<(i32, u32)>,
    pub combo_dlts: BTreeSet<String>,
    pub overlap: f64,
    pub sufficient: bool,
    pub approved_combination: bool,
    pub interaction_risk: bool,
    /// Agents lacking monotherapy dose-finding evidence.
    pub missing_mono: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub text: String,
    pub window: String,
    pub variant_window: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimenConfig {
    pub overlap_threshold: f64,
    pub interaction_terms: Vec<String>,
    pub classes: BTreeMap<String, ClassTemplate>,
    #[serde(skip)]
    interaction: Option<Regex>,
}

impl RegimenConfig {
    pub fn from_json(text: &str) -> Result<Self, CurateError> {
        let mut cfg: RegimenConfig =
            serde_json::from_str(text).map_err(|e| CurateError::Parse(format!("regimen config: {e}")))?;
        let pattern = format!("(?i)({})", cfg.interaction_terms.join("|"));
        cfg.interaction =
            Some(Regex::new(&pattern).map_err(|e| CurateError::Parse(format!("{pattern}: {e}")))?);
        for c in DesignClass::ALL {
            if !cfg.classes.contains_key(c.roman()) {
                return Err(CurateError::Parse(format!("missing template for class {c}")));
            }
        }
        Ok(cfg)
    }

    pub fn builtin() -> &'static RegimenConfig {
        static C: OnceLock<RegimenConfig> = OnceLock::new();
        C.get_or_init(|| RegimenConfig::from_json(crate::data::REGIMEN_TEMPLATES).expect("bundled regimen templates"))
    }

    fn mentions_interaction(&self, text: &str) -> bool {
        self.interaction.as_ref().is_some_and(|r| r.is_match(text))
    }

    fn template(&self, class: DesignClass) -> &ClassTemplate {
        &self.classes[class.roman()]
    }
}

pub fn derive_regimen_features(
    regimen: &RegimenEvidence,
    baselines: &BTreeMap<String, MonotherapyBaseline>,
) -> Result<RegimenFeatures, CurateError> {
    derive_regimen_features_with(regimen, baselines, RegimenConfig::builtin())
}

pub fn derive_regimen_features_with(
    regimen: &RegimenEvidence,
    baselines: &BTreeMap<String, MonotherapyBaseline>,
    config: &RegimenConfig,
) -> Result<RegimenFeatures, CurateError> {
    let keys = regimen.drug_keys();
    let distinct: BTreeSet<&String> = keys.iter().collect();
    if distinct.len() < 2 {
        return Err(CurateError::NotACombination(regimen.trial_id.clone()));
    }
    let combo = regimen.dlt_terms();
    let mono_union: BTreeSet<String> = keys
        .iter()
        .filter_map(|k| baselines.get(k))
        .flat_map(|b| b.dlt_terms.iter().cloned())
        .collect();
    let overlap = if combo.is_empty() {
        0.0
    } else {
        combo.intersection(&mono_union).count() as f64 / combo.len() as f64
    };
    let mut levels: Vec<&DoseLevel> = regimen.dose_levels.iter().collect();
    levels.sort_by_key(|l| l.level);
    let mut intensities = BTreeMap::new();
    for k in &keys {
        let Some(mtd) = baselines.get(k).and_then(|b| b.reference_mtd) else {
            continue;
        };
        let doses: Vec<f64> = levels
            .iter()
            .filter_map(|l| RegimenEvidence::dose_for(l, k))
            .collect();
        if let (Some(first), Some(max)) = (doses.first(), doses.iter().copied().reduce(f64::max)) {
            intensities.insert(k.clone(), DoseIntensity { start: first / mtd, max: max / mtd });
        }
    }
    let missing_mono = keys
        .iter()
        .filter(|k| baselines.get(*k).and_then(|b| b.reference_mtd).is_none())
        .cloned()
        .collect();
    let descriptors = regimen
        .dlt_definitions
        .iter()
        .map(String::as_str)
        .chain(regimen.design.as_deref())
        .collect::<Vec<_>>()
        .join("\n");
    Ok(RegimenFeatures {
        trial_id: regimen.trial_id.clone(),
        drugs: regimen.drugs.iter().map(|d| d.name.clone()).collect(),
        routes: regimen.drugs.iter().map(|d| d.route.clone()).collect(),
        population: regimen.population.clone(),
        intensities,
        dlt_pattern: levels
            .iter()
            .map(|l| (l.level, l.dlts.iter().map(|d| d.count).sum()))
            .collect(),
        sufficient: !levels.is_empty() && !combo.is_empty(),
        combo_dlts: combo,
        overlap,
        approved_combination: regimen.approved_combination,
        interaction_risk: config.mentions_interaction(&descriptors),
        missing_mono,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DesignClass {
    I,
    II,
    III,
    IV,
}

impl DesignClass {
    pub const ALL: [DesignClass; 4] = [DesignClass::I, DesignClass::II, DesignClass::III, DesignClass::IV];

    pub fn roman(&self) -> &'static str {
        match self {
            DesignClass::I => "I",
            DesignClass::II => "II",
            DesignClass::III => "III",
            DesignClass::IV => "IV",
        }
    }
}

impl fmt::Display for DesignClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.roman())
    }
}

pub fn classify_design(features: &RegimenFeatures) -> Result<DesignClass, CurateError> {
    classify_design_with(features, RegimenConfig::builtin())
}

pub fn classify_design_with(
    features: &RegimenFeatures,
    config: &RegimenConfig,
) -> Result<DesignClass, CurateError> {
    if !features.sufficient {
        return Err(CurateError::InsufficientEvidence(features.trial_id.clone()));
    }
    Ok(if features.approved_combination {
        DesignClass::I
    } else if !features.missing_mono.is_empty() || features.interaction_risk {
        DesignClass::IV
    } else if features.overlap >= config.overlap_threshold {
        DesignClass::II
    } else {
        DesignClass::III
    })
}

pub fn join_names(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [a] => a.clone(),
        [a, b] => format!("{a} and {b}"),
        [rest @ .., last] => format!("{}, and {last}", rest.join(", ")),
    }
}

fn render(config: &RegimenConfig, class: DesignClass, drugs: &str, variant: bool) -> String {
    let t = config.template(class);
    let window = if variant { &t.variant_window } else { &t.window };
    t.text.replace("{drugs}", drugs).replace("{window}", window)
}

fn stem(f: &RegimenFeatures) -> String {
    let drugs = join_names(&f.drugs);
    let mut routes: Vec<String> = f
        .routes
        .iter()
        .filter(|r| !r.is_empty())
        .cloned()
        .collect();
    routes.dedup();
    let mut lines = vec![
        format!("Drug combination: {drugs}"),
        format!("Population: {}", f.population),
    ];
    let mut evidence = Vec::new();
    for d in &f.drugs {
        let k = drug_key(d);
        match f.intensities.get(&k) {
            Some(i) => evidence.push(format!(
                "{d} was escalated from {:.0}% to {:.0}% of its single-agent MTD",
                i.start * 100.0,
                i.max * 100.0
            )),
            None if f.missing_mono.contains(&k) => {
                evidence.push(format!("{d} has no single-agent dose-finding data"))
            }
            None => {}
        }
    }
    if !f.combo_dlts.is_empty() {
        evidence.push(format!(
            "combination DLTs: {} ({:.0}% also seen with the single agents)",
            f.combo_dlts.iter().cloned().collect::<Vec<_>>().join(", "),
            f.overlap * 100.0
        ));
    }
    if !evidence.is_empty() {
        lines.push(format!("Prior evidence: {}.", evidence.join("; ")));
    }
    let route_text = if routes.is_empty() {
        String::new()
    } else {
        format!(" The agents are given by {} route.", join_names(&routes))
    };
    lines.push(format!(
        "A new early-phase trial will test {drugs} in {}.{route_text} Which trial design strategy fits this combination best?",
        f.population
    ));
    lines.join("\n")
}

/// Five design options for the same drug set: one per class plus a
/// near-duplicate variant with a different DLT window.
pub fn build_regimen_item(
    features: &RegimenFeatures,
    class: DesignClass,
    seed: u64,
) -> Result<McqItem, CurateError> {
    build_regimen_item_with(features, class, seed, RegimenConfig::builtin())
}

pub fn build_regimen_item_with(
    features: &RegimenFeatures,
    class: DesignClass,
    seed: u64,
    config: &RegimenConfig,
) -> Result<McqItem, CurateError> {
    let drugs = join_names(&features.drugs);
    let mut drafts: Vec<DraftOption> = DesignClass::ALL
        .iter()
        .map(|&c| DraftOption::plain(render(config, c, &drugs, false), if c == class { 2 } else { 0 }))
        .collect();
    let variant_of = if class == DesignClass::II { DesignClass::III } else { DesignClass::II };
    drafts.push(DraftOption::plain(render(config, variant_of, &drugs, true), 0));
    let mut metadata = BTreeMap::new();
    metadata.insert("trial_id".into(), json!(features.trial_id));
    metadata.insert("design_class".into(), json!(class.roman()));
    metadata.insert("overlap".into(), json!(features.overlap));
    metadata.insert("seed".into(), json!(seed));
    let id = format!("regimen-{}-{seed}", features.trial_id);
    McqItem::assemble(id, TaskType::Regimen, stem(features), drafts, metadata, seed)
}

/// Runs the whole pipeline over a corpus; combinations without sufficient
/// evidence are skipped and returned separately.
pub fn curate_corpus(
    corpus: &RegimenCorpus,
    seed: u64,
) -> (Vec<McqItem>, Vec<(String, CurateError)>) {
    let baselines = compute_monotherapy_baselines(corpus);
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (i, t) in corpus.trials.iter().enumerate() {
        if t.drugs.len() < 2 {
            continue;
        }
        let result = derive_regimen_features(t, &baselines).and_then(|f| {
            let class = classify_design(&f)?;
            build_regimen_item(&f, class, seed.wrapping_add(i as u64))
        });
        match result {
            Ok(item) => items.push(item),
            Err(e) => skipped.push((t.trial_id.clone(), e)),
        }
    }
    (items, skipped)
}
