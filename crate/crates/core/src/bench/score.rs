use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{io_err, AnswerKey, BenchError, BenchItem, TaskFamily};
use crate::curate::ebm::{score_predictions, DEFAULT_K};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub prediction: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum Components {
    Exact { correct: f64 },
    SetOverlap { precision: f64, recall: f64, f1: f64 },
    Gap { gap_detected: bool, recall_at_k: f64, hits: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub id: String,
    pub family: TaskFamily,
    pub prediction: Value,
    pub malformed: bool,
    #[serde(flatten)]
    pub components: Components,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyAggregate {
    pub family: TaskFamily,
    pub items: usize,
    pub malformed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_recall_at_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub items: usize,
    pub predictions: usize,
    pub unanswered: usize,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub rows: Vec<ItemScore>,
    pub families: Vec<FamilyAggregate>,
    pub metadata: RunMetadata,
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Option labels from `"B"`, `"B, C"`, `"[B,C]"` or `["B","C"]`; `None` when nothing parses.
pub fn parse_labels(v: &Value) -> Option<BTreeSet<String>> {
    let parts: Vec<String> = match v {
        Value::String(s) => s.split(|c: char| !c.is_ascii_alphanumeric()).map(str::to_string).collect(),
        Value::Array(a) => a.iter().map(|x| x.as_str().map(str::to_string)).collect::<Option<Vec<_>>>()?,
        _ => return None,
    };
    let mut out = BTreeSet::new();
    for p in parts.iter().map(|p| p.trim()).filter(|p| !p.is_empty()) {
        if p.len() != 1 || !p.chars().all(|c| c.is_ascii_alphabetic()) {
            return None;
        }
        out.insert(p.to_uppercase());
    }
    (!out.is_empty()).then_some(out)
}

/// Ranked PMIDs from an array of numbers or strings, or a delimited string.
pub fn parse_pmids(v: &Value) -> Option<Vec<u64>> {
    let from_text = |s: &str| s.trim().trim_start_matches("PMID:").trim().parse::<u64>().ok();
    let out: Vec<u64> = match v {
        Value::Array(a) => a
            .iter()
            .map(|x| match x {
                Value::Number(n) => n.as_u64(),
                Value::String(s) => from_text(s),
                _ => None,
            })
            .collect::<Option<_>>()?,
        Value::String(s) => s
            .split([',', ';', ' ', '\n', '\t'])
            .filter(|t| !t.trim().is_empty())
            .map(from_text)
            .collect::<Option<_>>()?,
        _ => return None,
    };
    (!out.is_empty()).then_some(out)
}

fn set_overlap(pred: &BTreeSet<String>, key: &BTreeSet<String>) -> (f64, f64, f64) {
    let tp = pred.intersection(key).count() as f64;
    let p = if pred.is_empty() { 0.0 } else { tp / pred.len() as f64 };
    let r = if key.is_empty() { 0.0 } else { tp / key.len() as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Scores one prediction; unusable predictions score zero and are flagged.
pub fn score_item(item: &BenchItem, prediction: &Value) -> ItemScore {
    let (components, malformed) = match &item.answer {
        AnswerKey::Single { answer } => {
            let key = normalize(answer);
            match prediction {
                Value::String(s) if !s.trim().is_empty() => {
                    let hit = normalize(s) == key
                        || (key.len() == 1 && parse_labels(prediction).is_some_and(|l| l.len() == 1 && l.contains(&key.to_uppercase())));
                    (Components::Exact { correct: if hit { 1.0 } else { 0.0 } }, false)
                }
                Value::Array(a) if a.len() == 1 && a[0].is_string() => {
                    (Components::Exact { correct: if normalize(a[0].as_str().unwrap_or("")) == key { 1.0 } else { 0.0 } }, false)
                }
                Value::Number(n) => (Components::Exact { correct: if n.to_string() == key { 1.0 } else { 0.0 } }, false),
                _ => (Components::Exact { correct: 0.0 }, true),
            }
        }
        AnswerKey::Labels { labels } => {
            let key: BTreeSet<String> = labels.iter().map(|l| l.trim().to_uppercase()).collect();
            match parse_labels(prediction) {
                Some(pred) => {
                    let (precision, recall, f1) = set_overlap(&pred, &key);
                    (Components::SetOverlap { precision, recall, f1 }, false)
                }
                None => (Components::SetOverlap { precision: 0.0, recall: 0.0, f1: 0.0 }, true),
            }
        }
        AnswerKey::Pmids { pmids } => {
            let truth: BTreeSet<u64> = pmids.iter().copied().collect();
            let zero = Components::Gap { gap_detected: false, recall_at_k: 0.0, hits: 0 };
            match parse_pmids(prediction).map(|ranked| score_predictions(&ranked, &truth, DEFAULT_K)) {
                Some(Ok(s)) => (Components::Gap { gap_detected: s.gap_detected, recall_at_k: s.recall_at_k, hits: s.hits }, false),
                _ => (zero, true),
            }
        }
    };
    ItemScore { id: item.id.clone(), family: item.family, prediction: prediction.clone(), malformed, components }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl SuiteReport {
    /// Per-family aggregates as means of row components.
    pub fn aggregate(rows: &[ItemScore]) -> Vec<FamilyAggregate> {
        let mut by: BTreeMap<TaskFamily, Vec<&ItemScore>> = BTreeMap::new();
        for r in rows {
            by.entry(r.family).or_default().push(r);
        }
        by.into_iter()
            .map(|(family, rs)| {
                let (mut acc, mut p, mut rc, mut f, mut gap, mut rk) = (vec![], vec![], vec![], vec![], vec![], vec![]);
                for r in &rs {
                    match &r.components {
                        Components::Exact { correct } => acc.push(*correct),
                        Components::SetOverlap { precision, recall, f1 } => {
                            p.push(*precision);
                            rc.push(*recall);
                            f.push(*f1);
                        }
                        Components::Gap { gap_detected, recall_at_k, .. } => {
                            gap.push(if *gap_detected { 1.0 } else { 0.0 });
                            rk.push(*recall_at_k);
                        }
                    }
                }
                FamilyAggregate {
                    family,
                    items: rs.len(),
                    malformed: rs.iter().filter(|r| r.malformed).count(),
                    accuracy: mean(&acc),
                    precision: mean(&p),
                    recall: mean(&rc),
                    f1: mean(&f),
                    gap_rate: mean(&gap),
                    mean_recall_at_k: mean(&rk),
                }
            })
            .collect()
    }

    pub fn markdown(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let mut s = String::from("# Benchmark report\n\n");
        writeln!(
            s,
            "{} items, {} predictions, {} unanswered, recall cutoff k = {}.\n",
            self.metadata.items, self.metadata.predictions, self.metadata.unanswered, self.metadata.k
        )
        .ok();
        s.push_str("| family | items | malformed | accuracy | precision | recall | F1 | gap rate | recall@k |\n");
        s.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for f in &self.families {
            writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                f.family,
                f.items,
                f.malformed,
                fmt(f.accuracy),
                fmt(f.precision),
                fmt(f.recall),
                fmt(f.f1),
                fmt(f.gap_rate),
                fmt(f.mean_recall_at_k)
            )
            .ok();
        }
        s
    }

    /// Writes `report.jsonl` (one row per item) and `report.md` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf), BenchError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut rows = String::new();
        for r in &self.rows {
            rows.push_str(&serde_json::to_string(r).map_err(|e| BenchError::Parse(e.to_string()))?);
            rows.push('\n');
        }
        let (jl, md) = (dir.join("report.jsonl"), dir.join("report.md"));
        fs::write(&jl, rows).map_err(|e| io_err(&jl, e))?;
        fs::write(&md, self.markdown()).map_err(|e| io_err(&md, e))?;
        Ok((jl, md))
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, BenchError> {
    if !path.is_file() {
        return Err(BenchError::PredictionsNotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| BenchError::Parse(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// Scores every item against the predictions file; items without a
/// prediction score zero and are flagged.
pub fn run_suite(items: &[BenchItem], predictions: &Path) -> Result<SuiteReport, BenchError> {
    let preds = read_predictions(predictions)?;
    let known: BTreeSet<&str> = items.iter().map(|i| i.id.as_str()).collect();
    let mut by_id: BTreeMap<&str, &Value> = BTreeMap::new();
    for p in &preds {
        if !known.contains(p.id.as_str()) {
            return Err(BenchError::UnmatchedItemId(p.id.clone()));
        }
        by_id.insert(p.id.as_str(), &p.prediction);
    }
    let rows: Vec<ItemScore> =
        items.iter().map(|it| score_item(it, by_id.get(it.id.as_str()).copied().unwrap_or(&Value::Null))).collect();
    let unanswered = items.iter().filter(|i| !by_id.contains_key(i.id.as_str())).count();
    Ok(SuiteReport {
        families: SuiteReport::aggregate(&rows),
        metadata: RunMetadata { items: items.len(), predictions: preds.len(), unanswered, k: DEFAULT_K },
        rows,
    })
}
