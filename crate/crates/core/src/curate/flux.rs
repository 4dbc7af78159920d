//! In vivo metabolic flux response items from reaction graphs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::mcq::{DraftOption, GainScore, McqItem, Rationale, TaskType};
use super::CurateError;
use crate::pathway::{cycle_nodes, terminal_endpoints, ReactionGraph, Topology};

/// Reaction-graph edges within which a response counts as proximal.
pub const NEAR_STEPS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxDirection {
    Downstream,
    Upstream,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxTrend {
    Decrease,
    Increase,
    Sustained,
    Transient,
    NoChange,
}

/// Meaning of one candidate outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluxOption {
    pub direction: FluxDirection,
    pub trend: FluxTrend,
    /// Referenced compound id, if the outcome is localized.
    pub compound: Option<String>,
}

/// Neighbourhood facts about one inhibited enzyme.
#[derive(Debug, Clone)]
pub struct FluxContext<'a> {
    rg: &'a ReactionGraph,
    pub gene: String,
    /// Reaction-step distance downstream (products of the target's reactions are 1).
    pub down: BTreeMap<usize, usize>,
    /// Reaction-step distance upstream (substrates are 1).
    pub up: BTreeMap<usize, usize>,
    pub cycle: BTreeSet<usize>,
    pub terminals: BTreeSet<usize>,
}

fn layered(rg: &ReactionGraph, seeds: &BTreeSet<usize>, forward: bool) -> BTreeMap<usize, usize> {
    let mut dist = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &s in seeds {
        dist.insert(s, 1);
        queue.push_back(s);
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        let next = if forward { rg.successors(v) } else { rg.predecessors(v) };
        for &w in next {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

impl<'a> FluxContext<'a> {
    pub fn new(rg: &'a ReactionGraph, gene: &str) -> Result<Self, CurateError> {
        let reactions = rg.reactions_of(gene);
        if reactions.is_empty() {
            return Err(CurateError::TargetNotInPathway(gene.to_string()));
        }
        let mut products = BTreeSet::new();
        let mut substrates = BTreeSet::new();
        for &r in reactions {
            let rx = &rg.reactions()[r];
            products.extend(rx.products.iter().copied());
            substrates.extend(rx.substrates.iter().copied());
        }
        Ok(Self {
            rg,
            gene: gene.to_string(),
            down: layered(rg, &products, true),
            up: layered(rg, &substrates, false),
            cycle: cycle_nodes(rg),
            terminals: terminal_endpoints(rg),
        })
    }

    pub fn graph(&self) -> &ReactionGraph {
        self.rg
    }

    fn resolve(&self, compound: &Option<String>) -> Result<Option<usize>, CurateError> {
        match compound {
            None => Ok(None),
            Some(id) => self
                .rg
                .index_of(id)
                .or_else(|| self.rg.index_of(&format!("cpd:{id}")))
                .map(Some)
                .ok_or_else(|| CurateError::TargetNotInPathway(id.clone())),
        }
    }

    /// Three-layer verification of an outcome under inhibition of the target.
    pub fn classify(&self, option: &FluxOption) -> Result<GainScore, CurateError> {
        use FluxTrend::*;
        let node = self.resolve(&option.compound)?;
        if option.trend == NoChange {
            return Ok(GainScore::zero(Rationale::Neutral));
        }
        if option.trend == Transient {
            return Ok(GainScore::one(Rationale::FeedbackTransient));
        }
        let gain = match option.direction {
            FluxDirection::None => match option.trend {
                Increase => GainScore::zero(Rationale::Neutral),
                _ => GainScore::one(Rationale::Neutral),
            },
            FluxDirection::Downstream => {
                let dist = node.and_then(|n| self.down.get(&n).copied());
                match (option.trend, node, dist) {
                    (Increase, _, _) => GainScore::zero(Rationale::MassBalanceViolation),
                    (_, None, _) => GainScore::one(Rationale::Neutral),
                    (_, Some(_), None) => GainScore::zero(Rationale::Neutral),
                    (_, Some(_), Some(d)) if d <= NEAR_STEPS => {
                        GainScore::two(Rationale::PositivePolarity)
                    }
                    (Sustained, Some(n), Some(_)) if self.terminals.contains(&n) => {
                        GainScore::two(Rationale::EndpointSuppression)
                    }
                    _ => GainScore::one(Rationale::Neutral),
                }
            }
            FluxDirection::Upstream => {
                let dist = node.and_then(|n| self.up.get(&n).copied());
                match (option.trend, node, dist) {
                    (Decrease | Sustained, _, _) => GainScore::zero(Rationale::MassBalanceViolation),
                    (_, None, _) => GainScore::one(Rationale::Neutral),
                    (_, Some(_), None) => GainScore::zero(Rationale::Neutral),
                    (_, Some(_), Some(d)) if d <= NEAR_STEPS => {
                        GainScore::two(Rationale::PositivePolarity)
                    }
                    _ => GainScore::one(Rationale::Neutral),
                }
            }
        };
        let in_cycle = node.is_some_and(|n| self.cycle.contains(&n));
        Ok(if in_cycle {
            gain.capped(1, Rationale::FeedbackTransient)
        } else {
            gain
        })
    }

    /// Closest ≤2-step downstream product, preferring nodes off cycles and
    /// not terminal.
    pub fn near_product(&self) -> Option<usize> {
        self.down
            .iter()
            .filter(|(_, &d)| d <= NEAR_STEPS)
            .min_by_key(|(&n, &d)| {
                (
                    self.cycle.contains(&n),
                    self.terminals.contains(&n),
                    d,
                    self.rg.label(n).to_string(),
                )
            })
            .map(|(&n, _)| n)
    }

    /// Closest reachable terminal product, avoiding `exclude` when possible.
    pub fn terminal_product(&self, exclude: Option<usize>) -> Option<usize> {
        self.down
            .iter()
            .filter(|(n, _)| self.terminals.contains(n))
            .min_by_key(|(&n, &d)| (Some(n) == exclude, d, self.rg.label(n).to_string()))
            .map(|(&n, _)| n)
    }
}

pub fn classify_flux_option(
    rg: &ReactionGraph,
    gene: &str,
    option: &FluxOption,
) -> Result<GainScore, CurateError> {
    FluxContext::new(rg, gene)?.classify(option)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    NearProduct,
    Terminal,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxSlot {
    pub anchor: Anchor,
    pub direction: FluxDirection,
    pub trend: FluxTrend,
    pub named: String,
    pub generic: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxTemplates {
    pub cohort: String,
    pub stem: String,
    pub slots: Vec<FluxSlot>,
}

impl FluxTemplates {
    pub fn builtin() -> &'static FluxTemplates {
        static T: OnceLock<FluxTemplates> = OnceLock::new();
        T.get_or_init(|| serde_json::from_str(crate::data::FLUX_TEMPLATES).expect("bundled flux templates"))
    }
}

/// Seven candidate outcomes for inhibition of `gene`, shuffled by `seed`.
pub fn build_flux_item(
    rg: &ReactionGraph,
    gene: &str,
    context: &str,
    seed: u64,
) -> Result<McqItem, CurateError> {
    build_flux_item_with(rg, gene, context, seed, FluxTemplates::builtin())
}

pub fn build_flux_item_with(
    rg: &ReactionGraph,
    gene: &str,
    context: &str,
    seed: u64,
    templates: &FluxTemplates,
) -> Result<McqItem, CurateError> {
    let ctx = FluxContext::new(rg, gene)?;
    let near = ctx.near_product();
    let terminal = ctx.terminal_product(near);
    let mut drafts = Vec::new();
    let mut semantics = Vec::new();
    for slot in &templates.slots {
        let node = match slot.anchor {
            Anchor::NearProduct => near,
            Anchor::Terminal => terminal,
            Anchor::None => None,
        };
        let name = node.and_then(|n| rg.compound(n).name.clone());
        let text = match &name {
            Some(n) => slot.named.replace("{compound}", n),
            None => slot.generic.clone(),
        }
        .replace("{cohort}", &templates.cohort);
        let option = FluxOption {
            direction: slot.direction,
            trend: slot.trend,
            compound: node.map(|n| rg.compound(n).id.clone()),
        };
        drafts.push(DraftOption::new(text.clone(), ctx.classify(&option)?));
        semantics.push(json!({"text": text, "option": option}));
    }
    if drafts.iter().all(|d| d.gain != 2) {
        return Err(CurateError::NoCorrectOption);
    }
    let question = templates
        .stem
        .replace("{context}", context)
        .replace("{gene}", gene);
    let mut metadata = BTreeMap::new();
    metadata.insert("target_gene".into(), json!(gene));
    metadata.insert("context".into(), json!(context));
    metadata.insert("seed".into(), json!(seed));
    metadata.insert(
        "near_product".into(),
        json!(near.map(|n| rg.compound(n).id.clone())),
    );
    metadata.insert(
        "terminal_product".into(),
        json!(terminal.map(|n| rg.compound(n).id.clone())),
    );
    metadata.insert("semantics".into(), json!(semantics));
    let id = format!("flux-{gene}-{seed}");
    McqItem::assemble(id, TaskType::Flux, question, drafts, metadata, seed)
}
