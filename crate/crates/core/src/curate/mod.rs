//! Deterministic generators for the benchmark task families.

pub mod ebm;
pub mod flux;
pub mod mcq;
pub mod regimen;
pub mod sample_size;
pub mod surrogate;
pub mod target;

use std::path::Path;

use thiserror::Error;

use crate::pathway::PathwayError;

pub use mcq::{DraftOption, GainScore, McqItem, McqOption, Rationale, TaskType};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurateError {
    #[error("pathway has no disease endpoints")]
    NoEndpoints,
    #[error("need {needed} candidates, only {available} available")]
    InsufficientCandidates { needed: usize, available: usize },
    #[error("no option reaches gain 2")]
    NoCorrectOption,
    #[error("duplicate option text: {0}")]
    DuplicateOption(String),
    #[error("invalid item: {0}")]
    InvalidItem(String),
    #[error("target not in pathway: {0}")]
    TargetNotInPathway(String),
    #[error("invalid ground truth {0}")]
    InvalidGroundTruth(i64),
    #[error("could not place 4 distinct distractors for {0}")]
    DistractorExhaustion(i64),
    #[error("regimen {0} is not a combination")]
    NotACombination(String),
    #[error("insufficient dose/DLT evidence for {0}")]
    InsufficientEvidence(String),
    #[error("no target of {0} maps into the pathway graphs")]
    NoMappedTarget(String),
    #[error("insufficient options: {0}")]
    InsufficientOptions(String),
    #[error("cross-drug distractor pool is empty")]
    PoolEmpty,
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("base DOI {0} has a single version")]
    UnpairedVersion(String),
    #[error("ground truth is empty")]
    DegenerateTruth,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Pathway(#[from] PathwayError),
}

impl CurateError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CurateError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}
