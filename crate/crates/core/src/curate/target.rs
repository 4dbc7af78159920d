//! Target-identification items from signed disease pathways.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::mcq::{DraftOption, GainScore, McqItem, Rationale, TaskType};
use super::CurateError;
use crate::pathway::{
    betweenness, infer_functional_type, path_polarity_idx, FunctionalType, NodeKind, PathCaps,
    PathwayNode, Polarity, SignedPathwayGraph,
};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const PRIORITY_THRESHOLD: f64 = 0.3;
pub const CENTRALITY_QUANTILE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiseaseCategory {
    Cancer,
    DrugResistance,
    Infection,
    Other,
}

impl FromStr for DiseaseCategory {
    type Err = CurateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "cancer" => Ok(DiseaseCategory::Cancer),
            "drug_resistance" => Ok(DiseaseCategory::DrugResistance),
            "infection" => Ok(DiseaseCategory::Infection),
            "other" => Ok(DiseaseCategory::Other),
            other => Err(CurateError::Parse(format!("unknown profile `{other}`"))),
        }
    }
}

impl fmt::Display for DiseaseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiseaseCategory::Cancer => "cancer",
            DiseaseCategory::DrugResistance => "drug_resistance",
            DiseaseCategory::Infection => "infection",
            DiseaseCategory::Other => "other",
        };
        f.write_str(s)
    }
}

/// Disease-specific weighting of functional classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicProfile {
    pub category: DiseaseCategory,
    pub prioritized: Vec<FunctionalType>,
    /// Gain-2 polarity threshold for ordinary genes.
    pub threshold: f64,
    /// Lowered threshold for prioritized functional types.
    pub priority_threshold: f64,
}

impl LogicProfile {
    pub fn for_category(category: DiseaseCategory) -> Self {
        use FunctionalType::*;
        let prioritized = match category {
            DiseaseCategory::Cancer => vec![Kinase, Enzyme],
            DiseaseCategory::DrugResistance => vec![Transporter, Receptor],
            DiseaseCategory::Infection => vec![PatternRecognitionReceptor, Cytokine],
            DiseaseCategory::Other => vec![],
        };
        Self {
            category,
            prioritized,
            threshold: DEFAULT_THRESHOLD,
            priority_threshold: PRIORITY_THRESHOLD,
        }
    }

    pub fn threshold_for(&self, t: FunctionalType) -> f64 {
        if self.prioritized.contains(&t) {
            self.priority_threshold
        } else {
            self.threshold
        }
    }
}

/// Keyword list of non-druggable gene classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blacklist {
    prefixes: Vec<String>,
    words: Vec<String>,
}

impl Blacklist {
    /// One entry per line, `#` comments. Entries of 2-4 uppercase letters are
    /// symbol prefixes, anything else is a case-insensitive substring.
    pub fn parse(text: &str) -> Self {
        let mut prefixes = Vec::new();
        let mut words = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let is_prefix =
                (2..=4).contains(&line.len()) && line.chars().all(|c| c.is_ascii_uppercase());
            if is_prefix {
                prefixes.push(line.to_string());
            } else {
                words.push(line.to_lowercase());
            }
        }
        Self { prefixes, words }
    }

    pub fn builtin() -> &'static Blacklist {
        static LIST: OnceLock<Blacklist> = OnceLock::new();
        LIST.get_or_init(|| Blacklist::parse(crate::data::DRUGGABILITY_BLACKLIST))
    }

    pub fn matches_symbol(&self, symbol: &str) -> bool {
        let upper = symbol.to_ascii_uppercase();
        let lower = symbol.to_lowercase();
        self.prefixes.iter().any(|p| upper.starts_with(p.as_str()))
            || self.words.iter().any(|w| lower.contains(w.as_str()))
    }

    pub fn matches(&self, node: &PathwayNode) -> bool {
        let label = node.graphics_name.to_lowercase();
        self.matches_symbol(&node.symbol) || self.words.iter().any(|w| label.contains(w.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetAssessment {
    pub symbol: String,
    pub functional_type: FunctionalType,
    pub polarity: Polarity,
    pub centrality: f64,
    pub central: bool,
    pub gain: GainScore,
}

/// Nearest-rank percentile of `values` (ascending rank ⌈q·n⌉).
pub fn nearest_rank(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

/// Pure gain rule shared by the curator and its tests.
pub fn target_gain(
    blacklisted: bool,
    polarity: f64,
    central: bool,
    threshold: f64,
) -> GainScore {
    if blacklisted {
        GainScore::zero(Rationale::NonDruggable)
    } else if polarity < 0.0 {
        GainScore::zero(Rationale::Protective)
    } else if polarity > threshold {
        GainScore::two(Rationale::PositivePolarity)
    } else if central && polarity > 0.0 {
        GainScore::two(Rationale::PositivePolarityCentral)
    } else {
        GainScore::one(Rationale::Neutral)
    }
}

/// Scores each candidate gene by polarity toward the endpoints, centrality
/// and druggability.
pub fn assign_target_gains(
    g: &SignedPathwayGraph,
    candidates: &[usize],
    profile: &LogicProfile,
    blacklist: &Blacklist,
) -> Result<BTreeMap<usize, TargetAssessment>, CurateError> {
    if g.endpoints().is_empty() {
        return Err(CurateError::NoEndpoints);
    }
    let endpoints: Vec<usize> = g.endpoints().iter().copied().collect();
    let bc = betweenness(g);
    let genes = g.candidate_genes();
    let pool: Vec<f64> = genes.iter().map(|&i| bc[i]).collect();
    let cutoff = nearest_rank(&pool, CENTRALITY_QUANTILE).unwrap_or(f64::INFINITY);
    let mut out = BTreeMap::new();
    for &c in candidates {
        let node = g.node(c);
        let polarity = path_polarity_idx(g, c, &endpoints, PathCaps::default());
        let functional_type = infer_functional_type(node);
        let centrality = bc[c];
        let central = centrality > 0.0 && centrality >= cutoff;
        let gain = target_gain(
            blacklist.matches(node),
            polarity.value,
            central,
            profile.threshold_for(functional_type),
        );
        out.insert(
            c,
            TargetAssessment {
                symbol: node.symbol.clone(),
                functional_type,
                polarity,
                centrality,
                central,
                gain,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TargetItemConfig {
    pub option_count: usize,
    pub seed: u64,
    /// Disease name used in the stem; defaults to the pathway title.
    pub disease: Option<String>,
}

impl Default for TargetItemConfig {
    fn default() -> Self {
        Self {
            option_count: 10,
            seed: 0,
            disease: None,
        }
    }
}

pub fn option_text(a: &TargetAssessment) -> String {
    format!("{} : {}", a.symbol, a.functional_type)
}

/// Builds one target-identification item from a pathway.
pub fn build_target_item(
    g: &SignedPathwayGraph,
    profile: &LogicProfile,
    config: &TargetItemConfig,
) -> Result<McqItem, CurateError> {
    build_target_item_with(g, profile, Blacklist::builtin(), config)
}

pub fn build_target_item_with(
    g: &SignedPathwayGraph,
    profile: &LogicProfile,
    blacklist: &Blacklist,
    config: &TargetItemConfig,
) -> Result<McqItem, CurateError> {
    let candidates = g.candidate_genes();
    if candidates.len() < config.option_count {
        return Err(CurateError::InsufficientCandidates {
            needed: config.option_count,
            available: candidates.len(),
        });
    }
    let scored = assign_target_gains(g, &candidates, profile, blacklist)?;
    let by_centrality = |a: &&TargetAssessment, b: &&TargetAssessment| {
        b.centrality
            .total_cmp(&a.centrality)
            .then_with(|| a.symbol.cmp(&b.symbol))
    };
    let mut correct: Vec<&TargetAssessment> =
        scored.values().filter(|a| a.gain.value == 2).collect();
    if correct.is_empty() {
        return Err(CurateError::NoCorrectOption);
    }
    correct.sort_by(by_centrality);
    correct.truncate(config.option_count.saturating_sub(1).max(1));
    let mut rest: Vec<&TargetAssessment> =
        scored.values().filter(|a| a.gain.value != 2).collect();
    rest.sort_by(by_centrality);
    let fill = config.option_count - correct.len();
    let chosen: Vec<&TargetAssessment> = correct.into_iter().chain(rest.into_iter().take(fill)).collect();

    let drafts = chosen
        .iter()
        .map(|a| DraftOption::new(option_text(a), a.gain))
        .collect();
    let disease = config
        .disease
        .clone()
        .unwrap_or_else(|| g.title.clone());
    let question = format!(
        "Which genes are the most promising therapeutic targets for modulating disease activity in {disease}? \
         Prefer targets whose modulation can reverse the disease process and improve outcomes. Select all that apply."
    );
    let mut metadata = BTreeMap::new();
    metadata.insert("pathway_id".into(), json!(g.pathway_id));
    metadata.insert("disease".into(), json!(disease));
    metadata.insert("profile".into(), json!(profile.category.to_string()));
    metadata.insert("seed".into(), json!(config.seed));
    metadata.insert(
        "polarity".into(),
        json!(chosen
            .iter()
            .map(|a| (a.symbol.clone(), a.polarity.value))
            .collect::<BTreeMap<_, _>>()),
    );
    let id = format!("target-{}-{}", g.pathway_id.replace(':', "_"), config.seed);
    McqItem::assemble(id, TaskType::TargetId, question, drafts, metadata, config.seed)
}

/// Whether a node can serve as a candidate gene.
pub fn is_candidate(g: &SignedPathwayGraph, i: usize) -> bool {
    g.node(i).kind == NodeKind::Gene && !g.endpoints().contains(&i)
}
