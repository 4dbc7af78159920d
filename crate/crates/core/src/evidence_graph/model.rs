use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GraphError;

pub const MAX_NAME_WORDS: usize = 5;
pub const MAX_NAME_CHARS: usize = 40;
pub const MAX_OBSERVATION_WORDS: usize = 30;

/// Closed set of entity kinds the graph accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityKind {
    GeneProtein,
    DiseasePhenotype,
    ChemicalDrug,
    CellTissue,
    PathwayGeneset,
    Paper,
    Finding,
}

impl EntityKind {
    pub const ALL: [EntityKind; 7] = [
        EntityKind::GeneProtein,
        EntityKind::DiseasePhenotype,
        EntityKind::ChemicalDrug,
        EntityKind::CellTissue,
        EntityKind::PathwayGeneset,
        EntityKind::Paper,
        EntityKind::Finding,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityKind::GeneProtein => "GENE_PROTEIN",
            EntityKind::DiseasePhenotype => "DISEASE_PHENOTYPE",
            EntityKind::ChemicalDrug => "CHEMICAL_DRUG",
            EntityKind::CellTissue => "CELL_TISSUE",
            EntityKind::PathwayGeneset => "PATHWAY_GENESET",
            EntityKind::Paper => "PAPER",
            EntityKind::Finding => "FINDING",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase().replace([' ', '/', '-'], "_");
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == up)
            .ok_or_else(|| GraphError::UnknownKind(s.to_string()))
    }
}

/// Controlled relation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Predicate {
    Activates,
    Inhibits,
    Binds,
    Phosphorylates,
    RegulatesExpression,
    MemberOfPathway,
    HasGenesetMember,
    ExpressedIn,
    AssociatedWith,
    CoOccurs,
    Supports,
    Refutes,
    InconclusiveFor,
    Cites,
    DerivedFromKg,
}

impl Predicate {
    pub const ALL: [Predicate; 15] = [
        Predicate::Activates,
        Predicate::Inhibits,
        Predicate::Binds,
        Predicate::Phosphorylates,
        Predicate::RegulatesExpression,
        Predicate::MemberOfPathway,
        Predicate::HasGenesetMember,
        Predicate::ExpressedIn,
        Predicate::AssociatedWith,
        Predicate::CoOccurs,
        Predicate::Supports,
        Predicate::Refutes,
        Predicate::InconclusiveFor,
        Predicate::Cites,
        Predicate::DerivedFromKg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Predicate::Activates => "ACTIVATES",
            Predicate::Inhibits => "INHIBITS",
            Predicate::Binds => "BINDS",
            Predicate::Phosphorylates => "PHOSPHORYLATES",
            Predicate::RegulatesExpression => "REGULATES_EXPRESSION",
            Predicate::MemberOfPathway => "MEMBER_OF_PATHWAY",
            Predicate::HasGenesetMember => "HAS_GENESET_MEMBER",
            Predicate::ExpressedIn => "EXPRESSED_IN",
            Predicate::AssociatedWith => "ASSOCIATED_WITH",
            Predicate::CoOccurs => "CO_OCCURS",
            Predicate::Supports => "SUPPORTS",
            Predicate::Refutes => "REFUTES",
            Predicate::InconclusiveFor => "INCONCLUSIVE_FOR",
            Predicate::Cites => "CITES",
            Predicate::DerivedFromKg => "DERIVED_FROM_KG",
        }
    }

    /// Predicates that only attach context (assay, species, cell type) to a finding.
    pub fn is_contextual(&self) -> bool {
        matches!(
            self,
            Predicate::AssociatedWith | Predicate::CoOccurs | Predicate::ExpressedIn
        )
    }

    /// Parses a predicate string. `DERIVED_FROM_KG:<name@version>` yields the
    /// provenance suffix as the second element.
    pub fn parse_with_suffix(s: &str) -> Result<(Predicate, Option<String>), GraphError> {
        let trimmed = s.trim();
        let (head, suffix) = match trimmed.split_once(':') {
            Some((h, rest)) => (h, Some(rest.trim().to_string()).filter(|r| !r.is_empty())),
            None => (trimmed, None),
        };
        let up = head.to_ascii_uppercase();
        let pred = Predicate::ALL
            .into_iter()
            .find(|p| p.as_str() == up)
            .ok_or_else(|| GraphError::UnknownPredicate(s.to_string()))?;
        if suffix.is_some() && pred != Predicate::DerivedFromKg {
            return Err(GraphError::UnknownPredicate(s.to_string()));
        }
        Ok((pred, suffix))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Predicate {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Predicate::parse_with_suffix(s).map(|(p, _)| p)
    }
}

/// A biomedical entity as proposed by an agent or a knowledge-base lookup.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curie: Option<String>,
    pub name: String,
    pub kind: EntityKind,
    /// Knowledge-base tag with version (`KEGG@2025-01`) or a `PMID:` note.
    pub source: String,
}

impl EntityRef {
    pub fn new(name: impl Into<String>, kind: EntityKind, source: impl Into<String>) -> Self {
        Self {
            curie: None,
            name: name.into(),
            kind,
            source: source.into(),
        }
    }

    pub fn with_curie(mut self, curie: impl Into<String>) -> Self {
        self.curie = Some(curie.into());
        self
    }

    /// Checks the naming rules. Paper entities must be named `PMID:...`.
    pub fn validate(&self) -> Result<(), GraphError> {
        if !name_within_limits(&self.name) {
            return Err(GraphError::InvalidName {
                name: self.name.clone(),
                reason: format!(
                    "more than {MAX_NAME_WORDS} words and longer than {MAX_NAME_CHARS} characters"
                ),
            });
        }
        if self.name.trim().is_empty() {
            return Err(GraphError::InvalidName {
                name: self.name.clone(),
                reason: "blank".into(),
            });
        }
        if self.kind == EntityKind::Paper && !self.name.trim_start().starts_with("PMID:") {
            return Err(GraphError::InvalidName {
                name: self.name.clone(),
                reason: "paper entities must start with \"PMID:\"".into(),
            });
        }
        if self.source.trim().is_empty() {
            return Err(GraphError::MissingEvidence(format!("entity {:?}", self.name)));
        }
        Ok(())
    }

    /// Effective CURIE: the explicit one, or `PMID:<n>` derived from a paper name.
    pub fn effective_curie(&self) -> Option<String> {
        if let Some(c) = &self.curie {
            if !c.trim().is_empty() {
                return Some(normalize_curie(c));
            }
        }
        if self.kind == EntityKind::Paper {
            return pmid_from_name(&self.name).map(|n| format!("PMID:{n}"));
        }
        None
    }
}

/// `≤5 words OR ≤40 characters`.
pub fn name_within_limits(name: &str) -> bool {
    name.split_whitespace().count() <= MAX_NAME_WORDS || name.chars().count() <= MAX_NAME_CHARS
}

/// Uppercases the namespace of a CURIE; the local part is kept verbatim.
pub fn normalize_curie(raw: &str) -> String {
    let raw = raw.trim();
    match raw.split_once(':') {
        Some((ns, local)) => format!("{}:{}", ns.trim().to_uppercase(), local.trim()),
        None => raw.to_string(),
    }
}

pub(crate) fn pmid_from_name(name: &str) -> Option<u64> {
    let rest = name.trim_start().strip_prefix("PMID:")?;
    let digits: String = rest
        .trim_start()
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok().filter(|n| *n > 0)
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredEntity {
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curie: Option<String>,
    /// Secondary identifiers merged into this node.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alt_curies: Vec<String>,
    /// Normalized labels, besides the primary name, that resolve to this node.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
    pub name: String,
    pub kind: EntityKind,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub id: String,
    pub subject: String,
    pub predicate: Predicate,
    pub object: String,
    pub evidence: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conflict_group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub entity: String,
    pub text: String,
    pub word_count: usize,
}

/// An entity proposal plus any observations to attach to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDraft {
    #[serde(flatten)]
    pub entity: EntityRef,
    #[serde(default)]
    pub observations: Vec<String>,
}

impl From<EntityRef> for EntityDraft {
    fn from(entity: EntityRef) -> Self {
        Self {
            entity,
            observations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationDraft {
    pub subject: EntityRef,
    pub predicate: String,
    pub object: EntityRef,
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationDraft {
    pub entity: EntityRef,
    pub text: String,
}

/// One merge cycle's worth of proposals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeBatch {
    #[serde(default)]
    pub entities: Vec<EntityDraft>,
    #[serde(default)]
    pub relations: Vec<RelationDraft>,
    #[serde(default)]
    pub observations: Vec<ObservationDraft>,
    #[serde(default)]
    pub cycle: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeReport {
    pub created: usize,
    pub merged: usize,
    pub relations_added: usize,
    /// Relation proposals that added nothing (same triple, no new evidence).
    pub rejected: usize,
    pub observations_added: usize,
    pub warnings: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn name_rule_is_a_disjunction() {
        assert!(name_within_limits("tumor necrosis factor alpha"));
        // six short words, under 40 chars
        assert!(name_within_limits("a b c d e f"));
        // one long token over 40 chars
        assert!(name_within_limits(&"x".repeat(60)));
        assert!(!name_within_limits(
            "one two three four five six seven eight nine ten"
        ));
    }

    #[test]
    fn paper_names_need_pmid_prefix() {
        let bad = EntityRef::new("Smith 2019", EntityKind::Paper, "PubMed");
        assert!(matches!(bad.validate(), Err(GraphError::InvalidName { .. })));
        let good = EntityRef::new("PMID:30994898 trial", EntityKind::Paper, "PubMed");
        good.validate().unwrap();
        assert_eq!(good.effective_curie().as_deref(), Some("PMID:30994898"));
    }

    #[test]
    fn predicate_parsing() {
        assert_eq!("inhibits".parse::<Predicate>().unwrap(), Predicate::Inhibits);
        let (p, s) = Predicate::parse_with_suffix("DERIVED_FROM_KG:KEGG@2025").unwrap();
        assert_eq!(p, Predicate::DerivedFromKg);
        assert_eq!(s.as_deref(), Some("KEGG@2025"));
        assert!(matches!(
            "BLOCKS".parse::<Predicate>(),
            Err(GraphError::UnknownPredicate(_))
        ));
        assert!("ACTIVATES:x".parse::<Predicate>().is_err());
    }

    #[test]
    fn curie_namespace_case_folded() {
        assert_eq!(normalize_curie("hgnc:11892"), "HGNC:11892");
        assert_eq!(normalize_curie(" doid:9256 "), "DOID:9256");
    }
}
