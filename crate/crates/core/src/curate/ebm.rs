//! Evidence-gap tasks from successive versions of systematic reviews.
//!
//! Review documents are publication-database full-record XML. Reference
//! lists are harvested by their `<Title>`: lists titled as studies
//! "included in this review" feed the included set, lists titled as
//! "excluded from this review" feed the excluded set. Abstract sections are
//! read from `<AbstractText Label="...">`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CurateError;

pub const DEFAULT_K: usize = 30;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewVersion {
    pub base_doi: String,
    pub version_doi: String,
    pub version: u32,
    pub pmid: Option<u64>,
    pub title: String,
    pub objectives: String,
    pub selection_criteria: String,
    pub outcomes: String,
    pub included: BTreeSet<u64>,
    pub excluded: BTreeSet<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedRefs {
    pub included: BTreeSet<u64>,
    pub excluded: BTreeSet<u64>,
    pub warnings: usize,
    pub has_included_section: bool,
}

/// Splits `10.1002/14651858.CD000259.pub3` into its base DOI and version 3.
/// Unsuffixed DOIs are version 1.
pub fn split_doi(doi: &str) -> (String, u32) {
    let doi = doi.trim();
    if let Some(pos) = doi.rfind(".pub") {
        if let Ok(v) = doi[pos + 4..].parse::<u32>() {
            return (doi[..pos].to_string(), v);
        }
    }
    (doi.to_string(), 1)
}

fn parse_doc(xml: &str) -> Result<roxmltree::Document<'_>, CurateError> {
    roxmltree::Document::parse(xml).map_err(|e| CurateError::MalformedDocument(e.to_string()))
}

fn child_text<'a>(node: roxmltree::Node<'a, '_>, tag: &str) -> Option<&'a str> {
    node.children().find(|c| c.has_tag_name(tag)).and_then(|c| c.text())
}

fn full_text(node: roxmltree::Node) -> String {
    let s: String = node
        .descendants()
        .filter(|d| d.is_text())
        .filter_map(|d| d.text())
        .collect();
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Included,
    Excluded,
}

fn section_of(title: &str) -> Option<Section> {
    let t = title.to_lowercase();
    if t.contains("excluded from this review") {
        Some(Section::Excluded)
    } else if t.contains("included in this review") {
        Some(Section::Included)
    } else {
        None
    }
}

fn harvest(doc: &roxmltree::Document) -> ParsedRefs {
    let mut out = ParsedRefs::default();
    for list in doc.descendants().filter(|n| n.has_tag_name("ReferenceList")) {
        let Some(section) = child_text(list, "Title").and_then(section_of) else {
            continue;
        };
        if section == Section::Included {
            out.has_included_section = true;
        }
        for id in list
            .descendants()
            .filter(|n| n.has_tag_name("ArticleId") && n.attribute("IdType") == Some("pubmed"))
        {
            match id.text().map(str::trim).and_then(|t| t.parse::<u64>().ok()).filter(|&p| p > 0) {
                Some(p) => {
                    match section {
                        Section::Included => out.included.insert(p),
                        Section::Excluded => out.excluded.insert(p),
                    };
                }
                None => out.warnings += 1,
            }
        }
    }
    if !out.has_included_section {
        out.warnings += 1;
    }
    let both: Vec<u64> = out.included.intersection(&out.excluded).copied().collect();
    for p in both {
        out.included.remove(&p);
        out.warnings += 1;
    }
    out
}

/// Harvests the included and excluded PMID sets from a review document.
pub fn parse_included_refs(xml: &str) -> Result<ParsedRefs, CurateError> {
    Ok(harvest(&parse_doc(xml)?))
}

/// Parses one review version: identifiers, abstract sections, reference sets.
pub fn parse_review(xml: &str) -> Result<(ReviewVersion, usize), CurateError> {
    let doc = parse_doc(xml)?;
    let refs = harvest(&doc);
    let root = doc.root_element();
    let doi = root
        .descendants()
        .find(|n| {
            n.has_tag_name("ArticleId")
                && n.attribute("IdType") == Some("doi")
                && !n.ancestors().any(|a| a.has_tag_name("ReferenceList"))
        })
        .or_else(|| root.descendants().find(|n| n.has_tag_name("ELocationID") && n.attribute("EIdType") == Some("doi")))
        .and_then(|n| n.text())
        .ok_or_else(|| CurateError::MalformedDocument("review has no DOI".into()))?;
    let (base_doi, version) = split_doi(doi);
    let pmid = root
        .descendants()
        .find(|n| n.has_tag_name("PMID") && !n.ancestors().any(|a| a.has_tag_name("ReferenceList")))
        .and_then(|n| n.text())
        .and_then(|t| t.trim().parse().ok());
    let title = root
        .descendants()
        .find(|n| n.has_tag_name("ArticleTitle"))
        .map(full_text)
        .unwrap_or_default();
    let mut sections: BTreeMap<String, String> = BTreeMap::new();
    for a in root.descendants().filter(|n| n.has_tag_name("AbstractText")) {
        let label = a.attribute("Label").unwrap_or("").to_uppercase();
        sections.entry(label).or_insert_with(|| full_text(a));
    }
    let pick = |keys: &[&str]| {
        keys.iter()
            .find_map(|k| sections.get(*k).cloned())
            .unwrap_or_default()
    };
    let v = ReviewVersion {
        base_doi,
        version_doi: doi.trim().to_string(),
        version,
        pmid,
        title,
        objectives: pick(&["OBJECTIVES", "OBJECTIVE"]),
        selection_criteria: pick(&["SELECTION CRITERIA", "ELIGIBILITY CRITERIA"]),
        outcomes: pick(&["MAIN OUTCOMES", "OUTCOMES", "MAIN RESULTS"]),
        included: refs.included,
        excluded: refs.excluded,
    };
    Ok((v, refs.warnings))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapTask {
    pub base_doi: String,
    pub older_doi: String,
    pub newer_doi: String,
    pub context: String,
    pub prior_included: Vec<u64>,
    pub truth: Vec<u64>,
}

impl GapTask {
    pub fn truth_set(&self) -> BTreeSet<u64> {
        self.truth.iter().copied().collect()
    }
}

pub fn task_context(newer: &ReviewVersion, older: &ReviewVersion) -> String {
    let prior: Vec<String> = older.included.iter().map(u64::to_string).collect();
    format!(
        "Review: {}\nObjectives: {}\nSelection criteria: {}\nOutcomes: {}\n\
         Studies included in the previous version (PMIDs): {}\n\
         Identify published trials that an update of this review should add. \
         Return up to {DEFAULT_K} PMIDs ranked from most to least likely.",
        newer.title,
        newer.objectives,
        newer.selection_criteria,
        newer.outcomes,
        prior.join(", ")
    )
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pairing {
    pub tasks: Vec<GapTask>,
    pub unpaired: Vec<CurateError>,
    pub dropped_empty: usize,
}

/// Groups versions by base DOI and pairs each with its predecessor.
pub fn pair_versions(records: &[ReviewVersion]) -> Pairing {
    let mut groups: BTreeMap<&str, Vec<&ReviewVersion>> = BTreeMap::new();
    for r in records {
        groups.entry(r.base_doi.as_str()).or_default().push(r);
    }
    let mut out = Pairing::default();
    for (base, mut versions) in groups {
        versions.sort_by_key(|v| v.version);
        versions.dedup_by_key(|v| v.version);
        if versions.len() < 2 {
            out.unpaired.push(CurateError::UnpairedVersion(base.to_string()));
            continue;
        }
        for w in versions.windows(2) {
            let (older, newer) = (w[0], w[1]);
            let truth: Vec<u64> = newer.included.difference(&older.included).copied().collect();
            if truth.is_empty() {
                out.dropped_empty += 1;
                continue;
            }
            out.tasks.push(GapTask {
                base_doi: base.to_string(),
                older_doi: older.version_doi.clone(),
                newer_doi: newer.version_doi.clone(),
                context: task_context(newer, older),
                prior_included: older.included.iter().copied().collect(),
                truth,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapScore {
    pub gap_detected: bool,
    pub recall_at_k: f64,
    pub hits: usize,
}

/// Scores a ranked PMID list against the gap truth at cutoff `k`.
pub fn score_predictions(ranked: &[u64], truth: &BTreeSet<u64>, k: usize) -> Result<GapScore, CurateError> {
    if truth.is_empty() {
        return Err(CurateError::DegenerateTruth);
    }
    let mut seen = BTreeSet::new();
    let hits = ranked
        .iter()
        .filter(|p| seen.insert(**p))
        .take(k)
        .filter(|p| truth.contains(p))
        .count();
    Ok(GapScore {
        gap_detected: hits > 0,
        recall_at_k: hits as f64 / truth.len() as f64,
        hits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub tasks: usize,
    pub gap_rate: f64,
    pub mean_recall: f64,
}

pub fn summarize(scores: &[GapScore]) -> GapSummary {
    let n = scores.len();
    if n == 0 {
        return GapSummary { tasks: 0, gap_rate: 0.0, mean_recall: 0.0 };
    }
    GapSummary {
        tasks: n,
        gap_rate: scores.iter().filter(|s| s.gap_detected).count() as f64 / n as f64,
        mean_recall: scores.iter().map(|s| s.recall_at_k).sum::<f64>() / n as f64,
    }
}

/// Reads every `*.xml` review and `*.json` bundle (an array of versions) in `dir`.
pub fn load_reviews(dir: &Path) -> Result<(Vec<ReviewVersion>, usize), CurateError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CurateError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    let mut warnings = 0;
    for p in paths {
        let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("");
        if ext != "xml" && ext != "json" {
            continue;
        }
        let text = fs::read_to_string(&p).map_err(|e| CurateError::io(&p, e))?;
        if ext == "xml" {
            let (v, w) = parse_review(&text)?;
            warnings += w;
            out.push(v);
        } else {
            let bundle: Vec<ReviewVersion> =
                serde_json::from_str(&text).map_err(|e| CurateError::Parse(format!("{}: {e}", p.display())))?;
            out.extend(bundle);
        }
    }
    Ok((out, warnings))
}

pub fn write_tasks(path: &Path, tasks: &[GapTask]) -> Result<(), CurateError> {
    let mut s = String::new();
    for t in tasks {
        s.push_str(&serde_json::to_string(t).map_err(|e| CurateError::Parse(e.to_string()))?);
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| CurateError::io(path, e))
}

pub fn read_tasks(path: &Path) -> Result<Vec<GapTask>, CurateError> {
    let text = fs::read_to_string(path).map_err(|e| CurateError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CurateError::Parse(e.to_string())))
        .collect()
}

/// Predictions file: JSONL of `{base_doi, ranked: [pmid, ...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapPrediction {
    pub base_doi: String,
    #[serde(default)]
    pub newer_doi: Option<String>,
    pub ranked: Vec<u64>,
}

pub fn read_predictions(path: &Path) -> Result<Vec<GapPrediction>, CurateError> {
    let text = fs::read_to_string(path).map_err(|e| CurateError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CurateError::Parse(e.to_string())))
        .collect()
}

/// Scores tasks against predictions; a task without a prediction scores zero.
pub fn score_tasks(tasks: &[GapTask], predictions: &[GapPrediction], k: usize) -> Result<Vec<GapScore>, CurateError> {
    tasks
        .iter()
        .map(|t| {
            let pred = predictions
                .iter()
                .find(|p| p.base_doi == t.base_doi && p.newer_doi.as_deref().is_none_or(|d| d == t.newer_doi));
            let ranked = pred.map(|p| p.ranked.as_slice()).unwrap_or(&[]);
            score_predictions(ranked, &t.truth_set(), k)
        })
        .collect()
}

/// File-backed DOI to PMID cache so curation can be replayed offline.
#[derive(Debug, Clone, Default)]
pub struct PmidCache {
    path: Option<PathBuf>,
    map: HashMap<String, u64>,
}

impl PmidCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, CurateError> {
        let map = if path.exists() {
            let text = fs::read_to_string(path).map_err(|e| CurateError::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| CurateError::Parse(e.to_string()))?
        } else {
            HashMap::new()
        };
        Ok(Self { path: Some(path.to_path_buf()), map })
    }

    pub fn get(&self, doi: &str) -> Option<u64> {
        self.map.get(doi).copied()
    }

    /// Returns the cached PMID or asks `lookup` and remembers a hit.
    pub fn resolve(&mut self, doi: &str, lookup: impl FnOnce(&str) -> Option<u64>) -> Option<u64> {
        if let Some(p) = self.get(doi) {
            return Some(p);
        }
        let p = lookup(doi)?;
        self.map.insert(doi.to_string(), p);
        Some(p)
    }

    pub fn save(&self) -> Result<(), CurateError> {
        let Some(path) = &self.path else { return Ok(()) };
        let sorted: BTreeMap<_, _> = self.map.iter().collect();
        let text = serde_json::to_string_pretty(&sorted).map_err(|e| CurateError::Parse(e.to_string()))?;
        fs::write(path, text).map_err(|e| CurateError::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Renders a minimal review document; used by fixtures and tests.
pub fn render_review_xml(v: &ReviewVersion) -> String {
    let refs = |title: &str, ids: &BTreeSet<u64>| {
        let body: String = ids
            .iter()
            .map(|p| format!("<Reference><Citation>Trial {p}</Citation><ArticleIdList><ArticleId IdType=\"pubmed\">{p}</ArticleId></ArticleIdList></Reference>"))
            .collect();
        format!("<ReferenceList><Title>{title}</Title>{body}</ReferenceList>")
    };
    let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    format!(
        "<PubmedArticle><MedlineCitation><PMID>{}</PMID><Article><ArticleTitle>{}</ArticleTitle><Abstract>\
         <AbstractText Label=\"OBJECTIVES\">{}</AbstractText>\
         <AbstractText Label=\"SELECTION CRITERIA\">{}</AbstractText>\
         <AbstractText Label=\"MAIN OUTCOMES\">{}</AbstractText></Abstract></Article></MedlineCitation>\
         <PubmedData><ArticleIdList><ArticleId IdType=\"doi\">{}</ArticleId></ArticleIdList>{}{}</PubmedData></PubmedArticle>",
        v.pmid.unwrap_or(0),
        esc(&v.title),
        esc(&v.objectives),
        esc(&v.selection_criteria),
        esc(&v.outcomes),
        v.version_doi,
        refs("References to studies included in this review", &v.included),
        refs("References to studies excluded from this review", &v.excluded),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn version(doi: &str, included: &[u64]) -> ReviewVersion {
        let (base_doi, version) = split_doi(doi);
        ReviewVersion {
            base_doi,
            version_doi: doi.into(),
            version,
            included: included.iter().copied().collect(),
            ..Default::default()
        }
    }

    #[test]
    fn doi_versions() {
        assert_eq!(split_doi("10.1002/14651858.CD000259.pub3"), ("10.1002/14651858.CD000259".into(), 3));
        assert_eq!(split_doi("10.1002/14651858.CD000259"), ("10.1002/14651858.CD000259".into(), 1));
    }

    #[test]
    fn harvest_sections() {
        let mut v = version("10.1/x.pub2", &[11, 12, 13]);
        v.excluded = [20, 21].into_iter().collect();
        let xml = render_review_xml(&v);
        let refs = parse_included_refs(&xml).unwrap();
        assert_eq!(refs.included.len(), 3);
        assert!(refs.included.is_disjoint(&refs.excluded));
        assert_eq!(refs.warnings, 0);
        assert_eq!(parse_included_refs(&xml).unwrap(), refs);
        let (parsed, _) = parse_review(&xml).unwrap();
        assert_eq!(parsed.version, 2);
        assert_eq!(parsed.included, v.included);
    }

    #[test]
    fn missing_section_and_bad_ids() {
        let xml = "<PubmedArticle><ReferenceList><Title>References to studies excluded from this review</Title>\
                   <ArticleId IdType=\"pubmed\">abc</ArticleId><ArticleId IdType=\"pubmed\">5</ArticleId></ReferenceList></PubmedArticle>";
        let refs = parse_included_refs(xml).unwrap();
        assert!(refs.included.is_empty());
        assert_eq!(refs.excluded.len(), 1);
        assert_eq!(refs.warnings, 2);
        assert!(matches!(parse_included_refs("<a>"), Err(CurateError::MalformedDocument(_))));
    }

    #[test]
    fn pairing() {
        let recs = vec![
            version("10.1/a", &[1]),
            version("10.1/a.pub2", &[1, 2, 3]),
            version("10.1/b", &[1, 2]),
            version("10.1/b.pub2", &[1]),
            version("10.1/c.pub4", &[9]),
        ];
        let p = pair_versions(&recs);
        assert_eq!(p.tasks.len(), 1);
        assert_eq!(p.tasks[0].truth, vec![2, 3]);
        assert_eq!(p.dropped_empty, 1);
        assert_eq!(p.unpaired, vec![CurateError::UnpairedVersion("10.1/c".into())]);
    }

    #[test]
    fn scoring() {
        let truth: BTreeSet<u64> = (1..=10).collect();
        let mut ranked: Vec<u64> = (100..126).collect();
        ranked.extend([1, 2, 3, 4]);
        let s = score_predictions(&ranked, &truth, 30).unwrap();
        assert!(s.gap_detected);
        assert!((s.recall_at_k - 0.4).abs() < 1e-12);
        let s = score_predictions(&[50, 60], &truth, 30).unwrap();
        assert!(!s.gap_detected && s.recall_at_k == 0.0);
        assert_eq!(score_predictions(&[1], &BTreeSet::new(), 30), Err(CurateError::DegenerateTruth));
    }

    #[test]
    fn cache_round_trip() {
        let dir = std::env::temp_dir().join(format!("pmid-cache-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cache.json");
        let mut c = PmidCache::open(&path).unwrap();
        assert_eq!(c.resolve("10.1/a", |_| Some(42)), Some(42));
        assert_eq!(c.resolve("10.1/a", |_| panic!("cached")), Some(42));
        c.save().unwrap();
        assert_eq!(PmidCache::open(&path).unwrap().get("10.1/a"), Some(42));
        fs::remove_dir_all(&dir).ok();
    }
}
