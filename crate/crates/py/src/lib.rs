//! Python bindings. Structured values cross the boundary as plain
//! dicts and lists built from the crate's JSON forms.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use kgresearch_core::agents::{run_research, DefaultOracle, ResearchConfig};
use kgresearch_core::bench::{prepare_dataset, Benchmark};
use kgresearch_core::curate::ebm::{score_predictions, DEFAULT_K};
use kgresearch_core::curate::flux::build_flux_item;
use kgresearch_core::curate::regimen::{curate_corpus, RegimenCorpus};
use kgresearch_core::curate::sample_size::{gen_sample_size_item, TrialContext};
use kgresearch_core::curate::surrogate::curate_drugs;
use kgresearch_core::curate::target::{build_target_item, DiseaseCategory, LogicProfile, TargetItemConfig};
use kgresearch_core::evidence_graph::{normalize_label, EvidenceGraphStore, MergeBatch};
use kgresearch_core::federation::{FederationClient, RateLimiter, SourceRegistry, SystemClock, UreqTransport};
use kgresearch_core::pathway::{
    betweenness_map, parse_flat_records, parse_kgml, path_polarity, GraphSnapshot, SignedPathwayGraph,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::Value;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => py.import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(err)
}

/// Deduplicating evidence graph.
#[pyclass(name = "EvidenceGraph")]
struct PyEvidenceGraph {
    store: EvidenceGraphStore,
}

#[pymethods]
impl PyEvidenceGraph {
    #[new]
    fn new() -> Self {
        Self { store: EvidenceGraphStore::new() }
    }

    /// Applies one merge batch (dict or JSON string); the store is unchanged on error.
    fn upsert<'py>(&mut self, py: Python<'py>, batch: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let batch: MergeBatch = from_py(py, batch)?;
        let report = self.store.upsert_batch(&batch).map_err(err)?;
        to_py(py, &report)
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.store.stats())
    }

    fn to_json(&self) -> String {
        self.store.to_json()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { store: EvidenceGraphStore::from_json(text).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.store.stats().entities
    }
}

#[pyfunction]
fn normalize(label: &str) -> PyResult<String> {
    normalize_label(label).map_err(err)
}

/// Parses KGML text into a snapshot dict of nodes, signed edges and reactions.
#[pyfunction]
fn parse_pathway<'py>(py: Python<'py>, kgml: &str) -> PyResult<Bound<'py, PyAny>> {
    let (g, rg) = parse_kgml(kgml).map_err(err)?;
    to_py(py, &GraphSnapshot::new(&g, &rg))
}

#[pyfunction]
fn betweenness<'py>(py: Python<'py>, kgml: &str) -> PyResult<Bound<'py, PyAny>> {
    let (g, _) = parse_kgml(kgml).map_err(err)?;
    to_py(py, &betweenness_map(&g))
}

/// Mean sign over simple paths from `gene` to the given endpoint symbols.
#[pyfunction]
fn polarity<'py>(py: Python<'py>, kgml: &str, gene: &str, endpoints: Vec<String>) -> PyResult<Bound<'py, PyAny>> {
    let (g, _) = parse_kgml(kgml).map_err(err)?;
    let ends: Vec<&str> = endpoints.iter().map(String::as_str).collect();
    to_py(py, &path_polarity(&g, gene, &ends).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (kgml, profile = "other", seed = 0, options = 10))]
fn curate_target_id<'py>(
    py: Python<'py>,
    kgml: &str,
    profile: &str,
    seed: u64,
    options: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let (g, _) = parse_kgml(kgml).map_err(err)?;
    let category: DiseaseCategory = profile.parse().map_err(err)?;
    let config = TargetItemConfig { option_count: options, seed, disease: None };
    to_py(py, &build_target_item(&g, &LogicProfile::for_category(category), &config).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (kgml, target, context = "a tracer labeling study", seed = 0))]
fn curate_flux<'py>(py: Python<'py>, kgml: &str, target: &str, context: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let (_, rg) = parse_kgml(kgml).map_err(err)?;
    to_py(py, &build_flux_item(&rg, target, context, seed).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (truth, seed = 0, context = None))]
fn curate_sample_size<'py>(
    py: Python<'py>,
    truth: i64,
    seed: u64,
    context: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let ctx: TrialContext = match context {
        Some(c) => from_py(py, c)?,
        None => TrialContext::default(),
    };
    to_py(py, &gen_sample_size_item(truth, &ctx, seed).map_err(err)?)
}

/// Returns (items, skipped) where skipped pairs a trial id with its reason.
#[pyfunction]
#[pyo3(signature = (corpus, seed = 0))]
fn curate_regimen<'py>(py: Python<'py>, corpus: &Bound<'py, PyAny>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let corpus: RegimenCorpus = from_py(py, corpus)?;
    let (items, skipped) = curate_corpus(&corpus, seed);
    let skipped: Vec<(String, String)> = skipped.into_iter().map(|(id, e)| (id, e.to_string())).collect();
    to_py(py, &(items, skipped))
}

#[pyfunction]
#[pyo3(signature = (drug_records, kgml_documents, seed = 0))]
fn curate_surrogate<'py>(
    py: Python<'py>,
    drug_records: &str,
    kgml_documents: Vec<String>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let records = parse_flat_records(drug_records).map_err(err)?;
    let graphs = kgml_documents
        .iter()
        .map(|d| parse_kgml(d).map(|(g, _)| g).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let (items, skipped) = curate_drugs(&records, &SignedPathwayGraph::merge_all(&graphs), seed);
    let skipped: Vec<(String, String)> = skipped.into_iter().map(|(id, e)| (id, e.to_string())).collect();
    to_py(py, &(items, skipped))
}

/// Recall@k of a ranked PMID list against the missing-study set.
#[pyfunction]
#[pyo3(signature = (ranked, truth, k = DEFAULT_K))]
fn score_gap<'py>(py: Python<'py>, ranked: Vec<u64>, truth: Vec<u64>, k: usize) -> PyResult<Bound<'py, PyAny>> {
    let truth: BTreeSet<u64> = truth.into_iter().collect();
    to_py(py, &score_predictions(&ranked, &truth, k).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (records, benchmark, seed = 0))]
fn prepare_benchmark<'py>(
    py: Python<'py>,
    records: &Bound<'py, PyAny>,
    benchmark: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<Value> = from_py(py, records)?;
    let benchmark: Benchmark = benchmark.parse().map_err(err)?;
    to_py(py, &prepare_dataset(&records, benchmark, seed).map_err(err)?)
}

/// Runs the orchestrator with the built-in oracle against the configured sources.
#[pyfunction]
#[pyo3(signature = (query, workspace, bfrs_budget = 5, dfrs_budget = 5))]
fn research<'py>(
    py: Python<'py>,
    query: &str,
    workspace: PathBuf,
    bfrs_budget: usize,
    dfrs_budget: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let config = ResearchConfig::new(query, workspace).with_budgets(bfrs_budget, dfrs_budget);
    let client = FederationClient::new(
        SourceRegistry::from_env(),
        Arc::new(UreqTransport::new()),
        Arc::new(RateLimiter::new(Arc::new(SystemClock::new()))),
    );
    let outcome = py.detach(|| run_research(&config, &client, &DefaultOracle)).map_err(err)?;
    to_py(py, &outcome)
}

#[pymodule]
fn kgresearch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEvidenceGraph>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(parse_pathway, m)?)?;
    m.add_function(wrap_pyfunction!(betweenness, m)?)?;
    m.add_function(wrap_pyfunction!(polarity, m)?)?;
    m.add_function(wrap_pyfunction!(curate_target_id, m)?)?;
    m.add_function(wrap_pyfunction!(curate_flux, m)?)?;
    m.add_function(wrap_pyfunction!(curate_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(curate_regimen, m)?)?;
    m.add_function(wrap_pyfunction!(curate_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(score_gap, m)?)?;
    m.add_function(wrap_pyfunction!(prepare_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(research, m)?)?;
    Ok(())
}
