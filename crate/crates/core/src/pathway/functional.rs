use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::graph::PathwayNode;
use super::PathwayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FunctionalType {
    #[serde(rename = "enzyme")]
    Enzyme,
    #[serde(rename = "kinase")]
    Kinase,
    #[serde(rename = "cytokine")]
    Cytokine,
    #[serde(rename = "receptor")]
    Receptor,
    #[serde(rename = "transporter")]
    Transporter,
    #[serde(rename = "transcription factor")]
    TranscriptionFactor,
    #[serde(rename = "transcription regulator")]
    TranscriptionRegulator,
    #[serde(rename = "phosphatase")]
    Phosphatase,
    #[serde(rename = "pattern recognition receptor")]
    PatternRecognitionReceptor,
    #[serde(rename = "growth factor")]
    GrowthFactor,
    #[serde(rename = "other")]
    Other,
}

impl FunctionalType {
    pub const ALL: [FunctionalType; 11] = [
        FunctionalType::Enzyme,
        FunctionalType::Kinase,
        FunctionalType::Cytokine,
        FunctionalType::Receptor,
        FunctionalType::Transporter,
        FunctionalType::TranscriptionFactor,
        FunctionalType::TranscriptionRegulator,
        FunctionalType::Phosphatase,
        FunctionalType::PatternRecognitionReceptor,
        FunctionalType::GrowthFactor,
        FunctionalType::Other,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FunctionalType::Enzyme => "enzyme",
            FunctionalType::Kinase => "kinase",
            FunctionalType::Cytokine => "cytokine",
            FunctionalType::Receptor => "receptor",
            FunctionalType::Transporter => "transporter",
            FunctionalType::TranscriptionFactor => "transcription factor",
            FunctionalType::TranscriptionRegulator => "transcription regulator",
            FunctionalType::Phosphatase => "phosphatase",
            FunctionalType::PatternRecognitionReceptor => "pattern recognition receptor",
            FunctionalType::GrowthFactor => "growth factor",
            FunctionalType::Other => "other",
        }
    }
}

impl fmt::Display for FunctionalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FunctionalType {
    type Err = PathwayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace('_', " ");
        FunctionalType::ALL
            .into_iter()
            .find(|t| t.label() == norm)
            .ok_or_else(|| PathwayError::UnknownFunctionalType(s.to_string()))
    }
}

#[derive(Debug, Deserialize)]
struct FamilyFile {
    order: Vec<String>,
    patterns: BTreeMap<String, Vec<String>>,
}

/// Curated gene-family dictionaries, checked in a fixed order.
#[derive(Debug, Clone)]
pub struct GeneFamilies {
    classes: Vec<(FunctionalType, Vec<Regex>)>,
}

impl GeneFamilies {
    pub fn from_json(text: &str) -> Result<Self, PathwayError> {
        let file: FamilyFile = serde_json::from_str(text)
            .map_err(|e| PathwayError::Config(format!("gene families: {e}")))?;
        let mut classes = Vec::new();
        for name in &file.order {
            let ty: FunctionalType = name.parse()?;
            let pats = file.patterns.get(name).cloned().unwrap_or_default();
            let regs = pats
                .iter()
                .map(|p| Regex::new(p).map_err(|e| PathwayError::Config(format!("{p}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            classes.push((ty, regs));
        }
        Ok(Self { classes })
    }

    pub fn builtin() -> &'static GeneFamilies {
        static FAMILIES: OnceLock<GeneFamilies> = OnceLock::new();
        FAMILIES.get_or_init(|| {
            GeneFamilies::from_json(crate::data::GENE_FAMILIES).expect("bundled gene families")
        })
    }

    fn lookup(&self, symbol: &str, include_enzyme: bool) -> Option<FunctionalType> {
        let sym = symbol.trim().to_ascii_uppercase();
        self.classes
            .iter()
            .filter(|(t, _)| include_enzyme || *t != FunctionalType::Enzyme)
            .find(|(_, regs)| regs.iter().any(|r| r.is_match(&sym)))
            .map(|(t, _)| *t)
    }

    /// Specific dictionary classes first, then EC-number presence (enzyme),
    /// then the enzyme dictionary, else `other`.
    pub fn infer(&self, node: &PathwayNode) -> FunctionalType {
        if let Some(t) = self.lookup(&node.symbol, false) {
            return t;
        }
        if !node.ec_numbers.is_empty() || node.entry_type == "enzyme" {
            return FunctionalType::Enzyme;
        }
        self.lookup(&node.symbol, true).unwrap_or(FunctionalType::Other)
    }
}

pub fn infer_functional_type(node: &PathwayNode) -> FunctionalType {
    node.functional_type
        .unwrap_or_else(|| GeneFamilies::builtin().infer(node))
}
