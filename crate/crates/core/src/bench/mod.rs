//! Open-benchmark subset preparation, per-family prediction scoring and
//! suite reports.

mod prepare;
mod score;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::curate::ebm::GapTask;
use crate::curate::McqItem;

pub use prepare::{abstract_texts, filter_records, prepare_dataset, SnapshotExpectation, SNAPSHOT_EXPECTATIONS};
pub use score::{
    parse_labels, parse_pmids, read_predictions, run_suite, score_item, Components, FamilyAggregate, ItemScore,
    Prediction, RunMetadata, SuiteReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("unknown benchmark: {0}")]
    UnknownBenchmark(String),
    #[error("record {record} lacks field {field:?}")]
    MissingField { record: String, field: String },
    #[error("predictions file not found: {0}")]
    PredictionsNotFound(PathBuf),
    #[error("prediction references unknown item id {0:?}")]
    UnmatchedItemId(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("parse error: {0}")]
    Parse(String),
}

fn io_err(path: &Path, e: impl fmt::Display) -> BenchError {
    BenchError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// Upstream benchmarks with a preparation recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    HleMed,
    Litqa2,
    SupergpqaMedHard,
    TrialpanoramaEqa,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] =
        [Benchmark::HleMed, Benchmark::Litqa2, Benchmark::SupergpqaMedHard, Benchmark::TrialpanoramaEqa];

    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::HleMed => "hle_med",
            Benchmark::Litqa2 => "litqa2",
            Benchmark::SupergpqaMedHard => "supergpqa_med_hard",
            Benchmark::TrialpanoramaEqa => "trialpanorama_eqa",
        }
    }

    pub fn family(self) -> TaskFamily {
        match self {
            Benchmark::HleMed => TaskFamily::HleMed,
            Benchmark::Litqa2 => TaskFamily::Litqa2,
            Benchmark::SupergpqaMedHard => TaskFamily::SupergpqaMedHard,
            Benchmark::TrialpanoramaEqa => TaskFamily::TrialpanoramaEqa,
        }
    }
}

impl FromStr for Benchmark {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s.trim())
            .ok_or_else(|| BenchError::UnknownBenchmark(s.to_string()))
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    HleMed,
    Litqa2,
    SupergpqaMedHard,
    TrialpanoramaEqa,
    TargetId,
    MoaPathway,
    Flux,
    SampleSize,
    Regimen,
    Surrogate,
    EbmGap,
}

impl TaskFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskFamily::HleMed => "hle_med",
            TaskFamily::Litqa2 => "litqa2",
            TaskFamily::SupergpqaMedHard => "supergpqa_med_hard",
            TaskFamily::TrialpanoramaEqa => "trialpanorama_eqa",
            TaskFamily::TargetId => "target_id",
            TaskFamily::MoaPathway => "moa_pathway",
            TaskFamily::Flux => "flux",
            TaskFamily::SampleSize => "sample_size",
            TaskFamily::Regimen => "regimen",
            TaskFamily::Surrogate => "surrogate",
            TaskFamily::EbmGap => "ebm_gap",
        }
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnswerKey {
    /// One option label or one free-text answer, scored by exact match.
    Single { answer: String },
    /// Several correct option labels, scored by precision/recall/F1.
    Labels { labels: Vec<String> },
    /// Trials missing from the older review version.
    Pmids { pmids: Vec<u64> },
}

impl AnswerKey {
    pub fn is_empty(&self) -> bool {
        match self {
            AnswerKey::Single { answer } => answer.trim().is_empty(),
            AnswerKey::Labels { labels } => labels.is_empty(),
            AnswerKey::Pmids { pmids } => pmids.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchItem {
    pub id: String,
    pub family: TaskFamily,
    pub question: Value,
    pub answer: AnswerKey,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl BenchItem {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.answer.is_empty() {
            return Err(BenchError::MissingField { record: self.id.clone(), field: "answer".into() });
        }
        Ok(())
    }

    /// Wraps a curated multiple-choice item; several answers become a label set.
    pub fn from_mcq(item: &McqItem) -> Self {
        let family = match item.task_type {
            crate::curate::TaskType::TargetId => TaskFamily::TargetId,
            crate::curate::TaskType::MoaPathway => TaskFamily::MoaPathway,
            crate::curate::TaskType::Flux => TaskFamily::Flux,
            crate::curate::TaskType::SampleSize => TaskFamily::SampleSize,
            crate::curate::TaskType::Regimen => TaskFamily::Regimen,
            crate::curate::TaskType::Surrogate => TaskFamily::Surrogate,
        };
        let answer = match item.answers.as_slice() {
            [one] => AnswerKey::Single { answer: one.clone() },
            many => AnswerKey::Labels { labels: many.to_vec() },
        };
        let options: Vec<Value> =
            item.options.iter().map(|o| serde_json::json!({"label": o.label, "text": o.text})).collect();
        let mut metadata = item.metadata.clone();
        metadata.insert("source".into(), Value::from("curated"));
        Self {
            id: item.id.clone(),
            family,
            question: serde_json::json!({"question": item.question, "options": options}),
            answer,
            metadata,
        }
    }

    pub fn from_gap_task(task: &GapTask) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("source".into(), Value::from("curated"));
        metadata.insert("newer_doi".into(), Value::from(task.newer_doi.clone()));
        Self {
            id: task.newer_doi.clone(),
            family: TaskFamily::EbmGap,
            question: serde_json::json!({
                "context": task.context,
                "older_doi": task.older_doi,
                "prior_included": task.prior_included,
            }),
            answer: AnswerKey::Pmids { pmids: task.truth.clone() },
            metadata,
        }
    }
}

/// Reads source records from a JSON array or JSON Lines file.
pub fn load_records(path: &Path) -> Result<Vec<Value>, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_records(&text)
}

pub fn parse_records(text: &str) -> Result<Vec<Value>, BenchError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| BenchError::Parse(e.to_string()));
    }
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| BenchError::Parse(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn write_items(path: &Path, items: &[BenchItem]) -> Result<(), BenchError> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).map_err(|e| BenchError::Parse(e.to_string()))?);
        out.push('\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_items(path: &Path) -> Result<Vec<BenchItem>, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| BenchError::Parse(e.to_string())))
        .collect()
}
