//! Sample-size estimation items with ratio-banded numeric distractors.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::mcq::{seeded_rng, DraftOption, McqItem, TaskType};
use super::CurateError;

pub const MIN_RATIO: f64 = 0.25;
pub const MAX_RATIO: f64 = 4.0;
pub const MIN_SAMPLE: i64 = 10;
pub const MAX_SAMPLE: i64 = 100_000;
pub const DISTRACTORS: usize = 4;
pub const MAX_ATTEMPTS: usize = 1000;

/// Trial description shown in the stem.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialContext {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub condition: String,
    #[serde(default)]
    pub arms: Vec<String>,
    #[serde(default)]
    pub primary_outcome: String,
    #[serde(default)]
    pub assumptions: String,
}

pub fn check_truth(truth: i64) -> Result<(), CurateError> {
    if (MIN_SAMPLE..=MAX_SAMPLE).contains(&truth) {
        Ok(())
    } else {
        Err(CurateError::InvalidGroundTruth(truth))
    }
}

/// Inclusive bounds `round(truth·0.25) ..= round(truth·4)` intersected with the validity band.
pub fn distractor_bounds(truth: i64) -> (i64, i64) {
    let lo = (truth as f64 * MIN_RATIO).round() as i64;
    let hi = (truth as f64 * MAX_RATIO).round() as i64;
    (lo.max(MIN_SAMPLE), hi.min(MAX_SAMPLE))
}

pub fn is_valid_distractor(truth: i64, d: i64) -> bool {
    let (lo, hi) = distractor_bounds(truth);
    d != truth && (lo..=hi).contains(&d)
}

/// Draws four distinct distractors with log-uniform ratios.
pub fn sample_distractors(truth: i64, seed: u64) -> Result<Vec<i64>, CurateError> {
    check_truth(truth)?;
    let mut rng = seeded_rng(seed);
    let (lo, hi) = (MIN_RATIO.ln(), MAX_RATIO.ln());
    let mut picked: Vec<i64> = Vec::new();
    for _ in 0..MAX_ATTEMPTS {
        if picked.len() == DISTRACTORS {
            break;
        }
        let r = rng.random_range(lo..=hi).exp();
        let d = (truth as f64 * r).round() as i64;
        if is_valid_distractor(truth, d) && !picked.contains(&d) {
            picked.push(d);
        }
    }
    if picked.len() < DISTRACTORS {
        return Err(CurateError::DistractorExhaustion(truth));
    }
    Ok(picked)
}

fn stem(ctx: &TrialContext) -> String {
    let mut parts = Vec::new();
    if !ctx.condition.is_empty() {
        parts.push(format!("Condition: {}", ctx.condition));
    }
    for (i, arm) in ctx.arms.iter().enumerate() {
        parts.push(format!("Arm {}: {arm}", super::mcq::label_for(i)));
    }
    if !ctx.primary_outcome.is_empty() {
        parts.push(format!("Primary outcome: {}", ctx.primary_outcome));
    }
    let mut q = String::from("Estimate the total number of participants this trial should enroll");
    if !ctx.assumptions.is_empty() {
        q.push_str(", assuming ");
        q.push_str(&ctx.assumptions);
    }
    q.push('.');
    parts.push(q);
    parts.join("\n")
}

/// Builds a five-option item around `truth` with explicit distractors.
pub fn assemble_sample_size_item(
    truth: i64,
    distractors: &[i64],
    ctx: &TrialContext,
    seed: u64,
    shuffle: bool,
) -> Result<McqItem, CurateError> {
    check_truth(truth)?;
    let distinct: BTreeSet<i64> = distractors.iter().copied().collect();
    if distractors.len() != DISTRACTORS
        || distinct.len() != DISTRACTORS
        || distractors.iter().any(|&d| !is_valid_distractor(truth, d))
    {
        return Err(CurateError::InvalidItem(format!(
            "distractors {distractors:?} violate the ratio band for {truth}"
        )));
    }
    let mut drafts: Vec<DraftOption> = distractors
        .iter()
        .map(|d| DraftOption::plain(d.to_string(), 0))
        .collect();
    drafts.push(DraftOption::plain(truth.to_string(), 2));
    let mut metadata = BTreeMap::new();
    metadata.insert("truth".into(), json!(truth));
    metadata.insert("seed".into(), json!(seed));
    if let Some(id) = &ctx.id {
        metadata.insert("trial_id".into(), json!(id));
    }
    let id = format!("sample-size-{}-{seed}", ctx.id.as_deref().unwrap_or(&truth.to_string()));
    if shuffle {
        McqItem::assemble(id, TaskType::SampleSize, stem(ctx), drafts, metadata, seed)
    } else {
        McqItem::assemble_ordered(id, TaskType::SampleSize, stem(ctx), drafts, metadata)
    }
}

pub fn gen_sample_size_item(truth: i64, ctx: &TrialContext, seed: u64) -> Result<McqItem, CurateError> {
    let distractors = sample_distractors(truth, seed)?;
    assemble_sample_size_item(truth, &distractors, ctx, seed, true)
}
