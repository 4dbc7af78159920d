use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CurateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    PositivePolarityCentral,
    PositivePolarity,
    Neutral,
    Protective,
    NonDruggable,
    MassBalanceViolation,
    FeedbackTransient,
    EndpointSuppression,
}

/// Graded option correctness: 2 best supported, 1 partially valid, 0 wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GainScore {
    pub value: u8,
    pub rationale: Rationale,
}

impl GainScore {
    pub fn new(value: u8, rationale: Rationale) -> Self {
        assert!(value <= 2, "gain must be 0, 1 or 2");
        Self { value, rationale }
    }

    pub fn zero(rationale: Rationale) -> Self {
        Self::new(0, rationale)
    }

    pub fn one(rationale: Rationale) -> Self {
        Self::new(1, rationale)
    }

    pub fn two(rationale: Rationale) -> Self {
        Self::new(2, rationale)
    }

    /// Lowers the value to at most `cap`, keeping the rationale unless
    /// `rationale` is supplied.
    pub fn capped(self, cap: u8, rationale: Rationale) -> Self {
        if self.value > cap {
            Self::new(cap, rationale)
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    TargetId,
    MoaPathway,
    Flux,
    SampleSize,
    Regimen,
    Surrogate,
}

impl TaskType {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskType::TargetId => "target_id",
            TaskType::MoaPathway => "moa_pathway",
            TaskType::Flux => "flux",
            TaskType::SampleSize => "sample_size",
            TaskType::Regimen => "regimen",
            TaskType::Surrogate => "surrogate",
        }
    }
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqOption {
    pub label: String,
    pub text: String,
    pub gain: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<Rationale>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McqItem {
    pub id: String,
    pub task_type: TaskType,
    pub question: String,
    pub options: Vec<McqOption>,
    pub answers: Vec<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

/// Option before labels are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DraftOption {
    pub text: String,
    pub gain: u8,
    pub rationale: Option<Rationale>,
}

impl DraftOption {
    pub fn new(text: impl Into<String>, gain: GainScore) -> Self {
        Self {
            text: text.into(),
            gain: gain.value,
            rationale: Some(gain.rationale),
        }
    }

    /// Option without a rationale tag.
    pub fn plain(text: impl Into<String>, gain: u8) -> Self {
        assert!(gain <= 2, "gain must be 0, 1 or 2");
        Self {
            text: text.into(),
            gain,
            rationale: None,
        }
    }
}

pub fn label_for(i: usize) -> String {
    assert!(i < 26, "at most 26 options");
    char::from(b'A' + i as u8).to_string()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

impl McqItem {
    /// Shuffles the drafts with `seed`, assigns letters from A and derives the
    /// answer set from the gain-2 options.
    pub fn assemble(
        id: impl Into<String>,
        task_type: TaskType,
        question: impl Into<String>,
        mut drafts: Vec<DraftOption>,
        metadata: BTreeMap<String, Value>,
        seed: u64,
    ) -> Result<Self, CurateError> {
        let mut rng = seeded_rng(seed);
        drafts.shuffle(&mut rng);
        Self::assemble_ordered(id, task_type, question, drafts, metadata)
    }

    /// Same as [`McqItem::assemble`] but keeps the given option order.
    pub fn assemble_ordered(
        id: impl Into<String>,
        task_type: TaskType,
        question: impl Into<String>,
        drafts: Vec<DraftOption>,
        metadata: BTreeMap<String, Value>,
    ) -> Result<Self, CurateError> {
        if drafts.len() > 26 {
            return Err(CurateError::InsufficientOptions(format!(
                "{} options exceed the letter range",
                drafts.len()
            )));
        }
        let options: Vec<McqOption> = drafts
            .into_iter()
            .enumerate()
            .map(|(i, d)| McqOption {
                label: label_for(i),
                text: d.text,
                gain: d.gain,
                rationale: d.rationale,
            })
            .collect();
        let answers = options
            .iter()
            .filter(|o| o.gain == 2)
            .map(|o| o.label.clone())
            .collect();
        let item = Self {
            id: id.into(),
            task_type,
            question: question.into(),
            options,
            answers,
            metadata,
        };
        item.validate()?;
        Ok(item)
    }

    pub fn validate(&self) -> Result<(), CurateError> {
        let mut seen = BTreeSet::new();
        for (i, o) in self.options.iter().enumerate() {
            if o.label != label_for(i) {
                return Err(CurateError::InvalidItem(format!(
                    "label {} at position {i}",
                    o.label
                )));
            }
            if o.gain > 2 {
                return Err(CurateError::InvalidItem(format!("gain {} on {}", o.gain, o.label)));
            }
            if !seen.insert(o.text.as_str()) {
                return Err(CurateError::DuplicateOption(o.text.clone()));
            }
        }
        let expected: Vec<&str> = self
            .options
            .iter()
            .filter(|o| o.gain == 2)
            .map(|o| o.label.as_str())
            .collect();
        if expected.is_empty() {
            return Err(CurateError::NoCorrectOption);
        }
        if expected != self.answers.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(CurateError::InvalidItem("answers differ from gain-2 labels".into()));
        }
        Ok(())
    }

    pub fn option(&self, label: &str) -> Option<&McqOption> {
        self.options.iter().find(|o| o.label == label)
    }

    pub fn answer_texts(&self) -> Vec<&str> {
        self.options
            .iter()
            .filter(|o| o.gain == 2)
            .map(|o| o.text.as_str())
            .collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("item serializes")
    }
}

pub fn write_items(path: &Path, items: &[McqItem]) -> Result<(), CurateError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CurateError::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CurateError::io(path, e))?;
    for item in items {
        writeln!(f, "{}", item.to_json_line()).map_err(|e| CurateError::io(path, e))?;
    }
    Ok(())
}

pub fn read_items(path: &Path) -> Result<Vec<McqItem>, CurateError> {
    let text = fs::read_to_string(path).map_err(|e| CurateError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CurateError::Parse(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}
