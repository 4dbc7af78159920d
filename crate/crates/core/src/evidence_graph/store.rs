use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::model::{
    word_count, EntityKind, EntityRef, MergeBatch, MergeReport, Observation, Predicate,
    RelationEdge, StoredEntity, MAX_OBSERVATION_WORDS,
};
use super::{normalize_label, GraphError};

pub const MAX_NEW_ENTITIES: usize = 10;
pub const MAX_NEW_RELATIONS: usize = 16;
const MAX_CONTEXT_EDGES_PER_FINDING: usize = 2;

#[derive(Debug, Clone, Default)]
pub struct EvidenceGraphStore {
    pub(super) entities: BTreeMap<String, StoredEntity>,
    pub(super) relations: Vec<RelationEdge>,
    pub(super) observations: BTreeMap<String, Vec<Observation>>,
    pub(super) conflict_groups: BTreeMap<String, BTreeSet<String>>,
    pub(super) next_relation: u64,
    pub(super) next_group: u64,
    curie_index: HashMap<String, String>,
    label_index: HashMap<(EntityKind, String), String>,
    triple_index: HashMap<(String, Predicate, String), usize>,
    relation_index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    pub entities: Vec<StoredEntity>,
    pub relations: Vec<RelationEdge>,
}

struct ValidRelation {
    subject: EntityRef,
    predicate: Predicate,
    object: EntityRef,
    evidence: Vec<String>,
}

impl EvidenceGraphStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = &StoredEntity> {
        self.entities.values()
    }

    pub fn relations(&self) -> &[RelationEdge] {
        &self.relations
    }

    pub fn entity(&self, key: &str) -> Option<&StoredEntity> {
        self.entities.get(key)
    }

    pub fn relation(&self, id: &str) -> Option<&RelationEdge> {
        self.relation_index.get(id).map(|&i| &self.relations[i])
    }

    pub fn observations_of(&self, key: &str) -> &[Observation] {
        self.observations.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn conflict_groups(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.conflict_groups
    }

    /// Resolves a seed given as entity key, CURIE, or label (any kind).
    pub fn resolve(&self, seed: &str) -> Option<&str> {
        if let Some((k, _)) = self.entities.get_key_value(seed) {
            return Some(k.as_str());
        }
        if seed.contains(':') {
            if let Some(k) = self.curie_index.get(&super::normalize_curie(seed)) {
                return Some(k.as_str());
            }
        }
        let label = normalize_label(seed).ok()?;
        EntityKind::ALL
            .iter()
            .find_map(|kind| self.label_index.get(&(*kind, label.clone())))
            .map(String::as_str)
    }

    /// Matches by CURIE first, then by normalized label within the kind.
    pub fn find_match(&self, entity: &EntityRef) -> Option<&str> {
        if let Some(curie) = entity.effective_curie() {
            if let Some(k) = self.curie_index.get(&curie) {
                return Some(k.as_str());
            }
        }
        let label = normalize_label(&entity.name).ok()?;
        self.label_index
            .get(&(entity.kind, label))
            .map(String::as_str)
    }

    /// Applies one merge cycle atomically.
    pub fn upsert_batch(&mut self, batch: &MergeBatch) -> Result<MergeReport, GraphError> {
        let relations = validate_batch(batch)?;

        let mut staged = self.clone();
        let mut report = MergeReport::default();
        let mut new_relations = 0usize;

        for draft in &batch.entities {
            let key = staged.upsert_entity(&draft.entity, &mut report);
            for text in &draft.observations {
                staged.add_observation(&key, text, &mut report);
            }
        }
        for obs in &batch.observations {
            let key = staged.upsert_endpoint(&obs.entity, &mut report);
            staged.add_observation(&key, &obs.text, &mut report);
        }
        for rel in relations {
            let subject = staged.upsert_endpoint(&rel.subject, &mut report);
            let object = staged.upsert_endpoint(&rel.object, &mut report);
            match staged.add_relation(subject, rel.predicate, object, rel.evidence) {
                RelationOutcome::Created => {
                    new_relations += 1;
                    report.relations_added += 1;
                }
                RelationOutcome::EvidenceMerged => {}
                RelationOutcome::Unchanged => report.rejected += 1,
            }
        }

        if report.created > MAX_NEW_ENTITIES || new_relations > MAX_NEW_RELATIONS {
            return Err(GraphError::BatchLimitExceeded {
                new_entities: report.created,
                new_relations,
            });
        }
        report.warnings = staged.context_edge_warnings();
        *self = staged;
        Ok(report)
    }

    fn upsert_entity(&mut self, entity: &EntityRef, report: &mut MergeReport) -> String {
        match self.find_match(entity).map(str::to_string) {
            Some(key) => {
                self.merge_into(&key, entity);
                report.merged += 1;
                key
            }
            None => {
                report.created += 1;
                self.create_entity(entity)
            }
        }
    }

    /// Like `upsert_entity`, but a match is not counted as a merge; used for
    /// relation endpoints and observation targets.
    fn upsert_endpoint(&mut self, entity: &EntityRef, report: &mut MergeReport) -> String {
        match self.find_match(entity).map(str::to_string) {
            Some(key) => {
                self.merge_into(&key, entity);
                key
            }
            None => {
                report.created += 1;
                self.create_entity(entity)
            }
        }
    }

    fn create_entity(&mut self, entity: &EntityRef) -> String {
        let curie = entity.effective_curie();
        let label = normalize_label(&entity.name).expect("validated name");
        let base = match &curie {
            Some(c) => c.clone(),
            None => format!("{}:{}", entity.kind.as_str().to_ascii_lowercase(), label),
        };
        let mut key = base.clone();
        let mut n = 2;
        while self.entities.contains_key(&key) {
            key = format!("{base}#{n}");
            n += 1;
        }
        if let Some(c) = &curie {
            self.curie_index.insert(c.clone(), key.clone());
        }
        self.label_index.insert((entity.kind, label), key.clone());
        self.entities.insert(
            key.clone(),
            StoredEntity {
                key: key.clone(),
                curie,
                alt_curies: Vec::new(),
                aliases: Vec::new(),
                name: entity.name.trim().to_string(),
                kind: entity.kind,
                provenance: vec![entity.source.trim().to_string()],
            },
        );
        key
    }

    fn merge_into(&mut self, key: &str, entity: &EntityRef) {
        let curie = entity.effective_curie();
        let label = normalize_label(&entity.name).ok();
        let stored = self.entities.get_mut(key).expect("matched key exists");
        let source = entity.source.trim().to_string();
        if !stored.provenance.contains(&source) {
            stored.provenance.push(source);
        }
        if let Some(c) = curie {
            if let std::collections::hash_map::Entry::Vacant(e) = self.curie_index.entry(c) {
                if stored.curie.is_none() {
                    stored.curie = Some(e.key().clone());
                } else {
                    stored.alt_curies.push(e.key().clone());
                }
                e.insert(key.to_string());
            }
        }
        if let Some(l) = label {
            if !self.label_index.contains_key(&(stored.kind, l.clone())) {
                stored.aliases.push(l.clone());
                self.label_index.insert((stored.kind, l), key.to_string());
            }
        }
    }

    fn add_observation(&mut self, key: &str, text: &str, report: &mut MergeReport) {
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        let list = self.observations.entry(key.to_string()).or_default();
        if list.iter().any(|o| o.text == text) {
            return;
        }
        list.push(Observation {
            entity: key.to_string(),
            word_count: word_count(&text),
            text,
        });
        report.observations_added += 1;
    }

    fn add_relation(
        &mut self,
        subject: String,
        predicate: Predicate,
        object: String,
        evidence: Vec<String>,
    ) -> RelationOutcome {
        let triple = (subject.clone(), predicate, object.clone());
        if let Some(&i) = self.triple_index.get(&triple) {
            let edge = &mut self.relations[i];
            let mut changed = false;
            for e in evidence {
                if !edge.evidence.contains(&e) {
                    edge.evidence.push(e);
                    changed = true;
                }
            }
            return if changed {
                RelationOutcome::EvidenceMerged
            } else {
                RelationOutcome::Unchanged
            };
        }
        self.next_relation += 1;
        let id = format!("r-{}", self.next_relation);
        let i = self.relations.len();
        self.relations.push(RelationEdge {
            id: id.clone(),
            subject,
            predicate,
            object,
            evidence,
            conflict_group: None,
        });
        self.triple_index.insert(triple, i);
        self.relation_index.insert(id, i);
        RelationOutcome::Created
    }

    fn context_edge_warnings(&self) -> Vec<String> {
        let mut per_finding: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &self.relations {
            if !r.predicate.is_contextual() {
                continue;
            }
            if self
                .entities
                .get(&r.subject)
                .is_some_and(|e| e.kind == EntityKind::Finding)
            {
                *per_finding.entry(r.subject.as_str()).or_default() += 1;
            }
        }
        per_finding
            .into_iter()
            .filter(|(_, n)| *n > MAX_CONTEXT_EDGES_PER_FINDING)
            .map(|(k, n)| format!("finding {k} has {n} contextual edges (max {MAX_CONTEXT_EDGES_PER_FINDING})"))
            .collect()
    }

    /// Entities within `depth` undirected hops of any seed, plus induced relations.
    pub fn query_subgraph<S: AsRef<str>>(&self, seeds: &[S], depth: usize) -> Subgraph {
        let mut adjacency: HashMap<&str, Vec<&str>> = HashMap::new();
        for r in &self.relations {
            adjacency.entry(&r.subject).or_default().push(&r.object);
            adjacency.entry(&r.object).or_default().push(&r.subject);
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut queue = VecDeque::new();
        for seed in seeds {
            if let Some(k) = self.resolve(seed.as_ref()) {
                if seen.insert(k) {
                    queue.push_back((k, 0usize));
                }
            }
        }
        while let Some((node, d)) = queue.pop_front() {
            if d == depth {
                continue;
            }
            for &next in adjacency.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                if seen.insert(next) {
                    queue.push_back((next, d + 1));
                }
            }
        }
        Subgraph {
            entities: seen.iter().map(|k| self.entities[*k].clone()).collect(),
            relations: self
                .relations
                .iter()
                .filter(|r| seen.contains(r.subject.as_str()) && seen.contains(r.object.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Tags two relations on the same endpoint pair as conflicting.
    pub fn tag_conflict(&mut self, relation_a: &str, relation_b: &str) -> Result<String, GraphError> {
        let ia = *self
            .relation_index
            .get(relation_a)
            .ok_or_else(|| GraphError::RelationNotFound(relation_a.to_string()))?;
        let ib = *self
            .relation_index
            .get(relation_b)
            .ok_or_else(|| GraphError::RelationNotFound(relation_b.to_string()))?;
        let (a, b) = (&self.relations[ia], &self.relations[ib]);
        if a.subject != b.subject || a.object != b.object {
            return Err(GraphError::MismatchedEndpoints(
                relation_a.to_string(),
                relation_b.to_string(),
            ));
        }
        let group = match (a.conflict_group.clone(), b.conflict_group.clone()) {
            (Some(ga), Some(gb)) if ga != gb => {
                // fold b's group into a's
                let moved = self.conflict_groups.remove(&gb).unwrap_or_default();
                for id in &moved {
                    if let Some(&i) = self.relation_index.get(id) {
                        self.relations[i].conflict_group = Some(ga.clone());
                    }
                }
                self.conflict_groups.entry(ga.clone()).or_default().extend(moved);
                ga
            }
            (Some(g), _) | (None, Some(g)) => g,
            (None, None) => {
                self.next_group += 1;
                format!("cg-{}", self.next_group)
            }
        };
        for i in [ia, ib] {
            self.relations[i].conflict_group = Some(group.clone());
            let id = self.relations[i].id.clone();
            self.conflict_groups.entry(group.clone()).or_default().insert(id);
        }
        Ok(group)
    }

    pub(super) fn from_parts(
        entities: Vec<StoredEntity>,
        relations: Vec<RelationEdge>,
        observations: Vec<Observation>,
        conflict_groups: BTreeMap<String, BTreeSet<String>>,
        next_relation: u64,
        next_group: u64,
    ) -> Result<Self, GraphError> {
        let mut store = EvidenceGraphStore {
            next_relation,
            next_group,
            conflict_groups,
            ..Default::default()
        };
        for e in entities {
            if e.provenance.is_empty() {
                return Err(GraphError::MissingEvidence(format!("entity {}", e.key)));
            }
            if let Some(c) = &e.curie {
                store.curie_index.insert(c.clone(), e.key.clone());
            }
            for c in &e.alt_curies {
                store.curie_index.insert(c.clone(), e.key.clone());
            }
            let label = normalize_label(&e.name)?;
            for l in std::iter::once(label).chain(e.aliases.iter().cloned()) {
                if store.label_index.insert((e.kind, l), e.key.clone()).is_some() {
                    return Err(GraphError::MalformedDocument(format!(
                        "duplicate label on entity {}",
                        e.key
                    )));
                }
            }
            store.entities.insert(e.key.clone(), e);
        }
        for r in relations {
            if r.evidence.is_empty() {
                return Err(GraphError::MissingEvidence(format!("relation {}", r.id)));
            }
            for end in [&r.subject, &r.object] {
                if !store.entities.contains_key(end) {
                    return Err(GraphError::MalformedDocument(format!(
                        "relation {} references unknown entity {end}",
                        r.id
                    )));
                }
            }
            let i = store.relations.len();
            store
                .triple_index
                .insert((r.subject.clone(), r.predicate, r.object.clone()), i);
            store.relation_index.insert(r.id.clone(), i);
            store.relations.push(r);
        }
        for o in observations {
            store.observations.entry(o.entity.clone()).or_default().push(o);
        }
        Ok(store)
    }
}

/// Structural equality: same entities, relations, observations and conflict
/// groups. Lookup indexes and id counters are derived state.
impl PartialEq for EvidenceGraphStore {
    fn eq(&self, other: &Self) -> bool {
        self.entities == other.entities
            && self.relations == other.relations
            && self.observations == other.observations
            && self.conflict_groups == other.conflict_groups
    }
}

impl Eq for EvidenceGraphStore {}

enum RelationOutcome {
    Created,
    EvidenceMerged,
    Unchanged,
}

fn validate_batch(batch: &MergeBatch) -> Result<Vec<ValidRelation>, GraphError> {
    for d in &batch.entities {
        d.entity.validate()?;
        for text in &d.observations {
            check_observation(&d.entity.name, text)?;
        }
    }
    for o in &batch.observations {
        o.entity.validate()?;
        check_observation(&o.entity.name, &o.text)?;
    }
    let mut out = Vec::with_capacity(batch.relations.len());
    for r in &batch.relations {
        r.subject.validate()?;
        r.object.validate()?;
        let (predicate, suffix) = Predicate::parse_with_suffix(&r.predicate)?;
        let mut evidence: Vec<String> = r
            .evidence
            .iter()
            .map(|e| e.trim().to_string())
            .filter(|e| !e.is_empty())
            .collect();
        if let Some(s) = suffix {
            if !evidence.contains(&s) {
                evidence.push(s);
            }
        }
        if evidence.is_empty() {
            return Err(GraphError::MissingEvidence(format!(
                "relation {} {} {}",
                r.subject.name, r.predicate, r.object.name
            )));
        }
        out.push(ValidRelation {
            subject: r.subject.clone(),
            predicate,
            object: r.object.clone(),
            evidence,
        });
    }
    Ok(out)
}

fn check_observation(entity: &str, text: &str) -> Result<(), GraphError> {
    let words = word_count(text);
    if words > MAX_OBSERVATION_WORDS {
        return Err(GraphError::ObservationTooLong {
            entity: entity.to_string(),
            words,
        });
    }
    if words == 0 {
        return Err(GraphError::MissingEvidence(format!("empty observation on {entity}")));
    }
    Ok(())
}
