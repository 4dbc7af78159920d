use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FederationError;

/// Entity types accepted by the literature annotation service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityType {
    Gene,
    Disease,
    Chemical,
    Species,
    Mutation,
    Variant,
    Cellline,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::Gene,
        EntityType::Disease,
        EntityType::Chemical,
        EntityType::Species,
        EntityType::Mutation,
        EntityType::Variant,
        EntityType::Cellline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Gene => "GENE",
            EntityType::Disease => "DISEASE",
            EntityType::Chemical => "CHEMICAL",
            EntityType::Species => "SPECIES",
            EntityType::Mutation => "MUTATION",
            EntityType::Variant => "VARIANT",
            EntityType::Cellline => "CELLLINE",
        }
    }
}

impl FromStr for EntityType {
    type Err = FederationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_uppercase().replace(['_', ' '], "");
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == up)
            .ok_or_else(|| FederationError::UnsupportedEntityType(s.to_string()))
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Renders `@TYPE_text` with whitespace runs and hyphens turned into underscores.
pub fn render_entity(kind: EntityType, text: &str) -> String {
    let body = text
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .replace('-', "_");
    format!("@{}_{}", kind.as_str(), body)
}

/// Builds an entity-typed boolean query from typed terms joined by connectives.
pub fn build_boolean_query(terms: &[(&str, &str)], connectives: &[&str]) -> Result<String, FederationError> {
    if terms.is_empty() {
        return Err(FederationError::InvalidQuery("no terms".into()));
    }
    if connectives.len() != terms.len() - 1 {
        return Err(FederationError::InvalidQuery(format!(
            "{} terms need {} connectives, got {}",
            terms.len(),
            terms.len() - 1,
            connectives.len()
        )));
    }
    let mut out = String::new();
    for (i, (kind, text)) in terms.iter().enumerate() {
        let kind: EntityType = kind.parse()?;
        if text.trim().is_empty() {
            return Err(FederationError::InvalidQuery("empty term".into()));
        }
        if i > 0 {
            let c = connectives[i - 1].trim().to_uppercase();
            if !matches!(c.as_str(), "AND" | "OR" | "NOT") {
                return Err(FederationError::InvalidQuery(format!("connective {c}")));
            }
            out.push(' ');
            out.push_str(&c);
            out.push(' ');
        }
        out.push_str(&render_entity(kind, text));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Predicate {
    Treat,
    Cause,
    Interact,
    Inhibit,
    Associate,
}

impl Predicate {
    pub const ALL: [Predicate; 5] = [
        Predicate::Treat,
        Predicate::Cause,
        Predicate::Interact,
        Predicate::Inhibit,
        Predicate::Associate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Predicate::Treat => "TREAT",
            Predicate::Cause => "CAUSE",
            Predicate::Interact => "INTERACT",
            Predicate::Inhibit => "INHIBIT",
            Predicate::Associate => "ASSOCIATE",
        }
    }
}

impl FromStr for Predicate {
    type Err = FederationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_uppercase();
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == up)
            .ok_or_else(|| FederationError::UnknownPredicate(s.to_string()))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Entity kinds served by unified search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Gene,
    Protein,
    Disease,
    Phenotype,
    Drug,
    Compound,
    Pathway,
    Variant,
    Publication,
    Trial,
    Function,
}

impl EntityKind {
    pub const ALL: [EntityKind; 11] = [
        EntityKind::Gene,
        EntityKind::Protein,
        EntityKind::Disease,
        EntityKind::Phenotype,
        EntityKind::Drug,
        EntityKind::Compound,
        EntityKind::Pathway,
        EntityKind::Variant,
        EntityKind::Publication,
        EntityKind::Trial,
        EntityKind::Function,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Gene => "gene",
            EntityKind::Protein => "protein",
            EntityKind::Disease => "disease",
            EntityKind::Phenotype => "phenotype",
            EntityKind::Drug => "drug",
            EntityKind::Compound => "compound",
            EntityKind::Pathway => "pathway",
            EntityKind::Variant => "variant",
            EntityKind::Publication => "publication",
            EntityKind::Trial => "trial",
            EntityKind::Function => "function",
        }
    }

    /// Literature annotation type for relation search, when one exists.
    pub fn entity_type(self) -> Option<EntityType> {
        match self {
            EntityKind::Gene | EntityKind::Protein => Some(EntityType::Gene),
            EntityKind::Disease | EntityKind::Phenotype => Some(EntityType::Disease),
            EntityKind::Drug | EntityKind::Compound => Some(EntityType::Chemical),
            EntityKind::Variant => Some(EntityType::Variant),
            _ => None,
        }
    }
}

impl FromStr for EntityKind {
    type Err = FederationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let low = s.trim().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == low)
            .ok_or_else(|| FederationError::UnsupportedEntityType(s.to_string()))
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub kind: EntityKind,
    pub query: String,
    /// Empty means every source serving `kind`.
    #[serde(default)]
    pub sources: Vec<String>,
    pub limit: usize,
    #[serde(default)]
    pub save: Option<PathBuf>,
}

impl QuerySpec {
    pub fn new(kind: EntityKind, query: impl Into<String>) -> Self {
        Self { kind, query: query.into(), sources: Vec::new(), limit: 10, save: None }
    }

    pub fn with_sources(mut self, sources: &[&str]) -> Self {
        self.sources = sources.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = limit;
        self
    }

    pub fn with_save(mut self, dir: impl Into<PathBuf>) -> Self {
        self.save = Some(dir.into());
        self
    }

    pub fn validate(&self) -> Result<(), FederationError> {
        if self.query.trim().is_empty() {
            return Err(FederationError::InvalidQuery("query text is empty".into()));
        }
        if self.limit == 0 {
            return Err(FederationError::InvalidQuery("result cap must be >= 1".into()));
        }
        Ok(())
    }
}
