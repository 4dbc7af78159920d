//! Closed vocabulary of table operations over workspace CSV files.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::workspace::Workspace;
use super::AgentError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<usize, AgentError> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| AgentError::Analysis(format!("no column {name:?}")))
    }

    pub fn from_csv(text: &str) -> Result<Self, AgentError> {
        let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let columns = r
            .headers()
            .map_err(|e| AgentError::Analysis(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| AgentError::Analysis(e.to_string()))?;
            let mut row: Vec<String> = rec.iter().map(str::to_string).collect();
            row.resize(columns.len(), String::new());
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn to_csv(&self) -> Result<String, AgentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(|e| AgentError::Analysis(e.to_string()))?;
        for row in &self.rows {
            w.write_record(row).map_err(|e| AgentError::Analysis(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| AgentError::Analysis(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| AgentError::Analysis(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AnalysisSpec {
    /// Rows whose `column` contains `contains` (case-insensitive).
    Filter { input: String, column: String, contains: String, output: String },
    /// Inner join on equal `on` values; right-side columns are prefixed `right_`.
    Join { left: String, right: String, on: String, output: String },
    /// Row counts per distinct `group_by` value.
    Aggregate { input: String, group_by: String, output: String },
    /// Adds a `match` column with the first match (or first group) of `pattern`.
    Extract { input: String, column: String, pattern: String, output: String },
    /// Keeps the first row for each distinct `column` value.
    Dedup { input: String, column: String, output: String },
}

impl AnalysisSpec {
    pub fn output(&self) -> &str {
        match self {
            AnalysisSpec::Filter { output, .. }
            | AnalysisSpec::Join { output, .. }
            | AnalysisSpec::Aggregate { output, .. }
            | AnalysisSpec::Extract { output, .. }
            | AnalysisSpec::Dedup { output, .. } => output,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisOutcome {
    pub output: String,
    pub rows: usize,
}

/// Evaluates `spec`, loading input tables through `load`.
pub fn run_analysis(spec: &AnalysisSpec, load: &dyn Fn(&str) -> Result<Table, AgentError>) -> Result<Table, AgentError> {
    match spec {
        AnalysisSpec::Filter { input, column, contains, .. } => {
            let t = load(input)?;
            let c = t.column(column)?;
            let needle = contains.to_lowercase();
            let rows = t.rows.iter().filter(|r| r[c].to_lowercase().contains(&needle)).cloned().collect();
            Ok(Table { columns: t.columns.clone(), rows })
        }
        AnalysisSpec::Join { left, right, on, .. } => {
            let (l, r) = (load(left)?, load(right)?);
            let (lc, rc) = (l.column(on)?, r.column(on)?);
            let mut index: HashMap<&str, Vec<&Vec<String>>> = HashMap::new();
            for row in &r.rows {
                index.entry(row[rc].as_str()).or_default().push(row);
            }
            let mut columns = l.columns.clone();
            columns.extend(r.columns.iter().enumerate().filter(|(i, _)| *i != rc).map(|(_, c)| format!("right_{c}")));
            let mut rows = Vec::new();
            for lrow in &l.rows {
                for rrow in index.get(lrow[lc].as_str()).into_iter().flatten() {
                    let mut row = lrow.clone();
                    row.extend(rrow.iter().enumerate().filter(|(i, _)| *i != rc).map(|(_, v)| v.clone()));
                    rows.push(row);
                }
            }
            Ok(Table { columns, rows })
        }
        AnalysisSpec::Aggregate { input, group_by, .. } => {
            let t = load(input)?;
            let c = t.column(group_by)?;
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &t.rows {
                *counts.entry(r[c].as_str()).or_default() += 1;
            }
            let mut out = Table::new(&[group_by.as_str(), "count"]);
            for (k, n) in counts {
                out.push(vec![k.to_string(), n.to_string()]);
            }
            Ok(out)
        }
        AnalysisSpec::Extract { input, column, pattern, .. } => {
            let t = load(input)?;
            let c = t.column(column)?;
            let re = Regex::new(pattern).map_err(|e| AgentError::Analysis(e.to_string()))?;
            let mut columns = t.columns.clone();
            columns.push("match".into());
            let rows = t
                .rows
                .iter()
                .map(|r| {
                    let m = re
                        .captures(&r[c])
                        .and_then(|cap| cap.get(1).or_else(|| cap.get(0)))
                        .map(|m| m.as_str().to_string())
                        .unwrap_or_default();
                    let mut row = r.clone();
                    row.push(m);
                    row
                })
                .collect();
            Ok(Table { columns, rows })
        }
        AnalysisSpec::Dedup { input, column, .. } => {
            let t = load(input)?;
            let c = t.column(column)?;
            let mut seen = BTreeSet::new();
            let rows = t.rows.iter().filter(|r| seen.insert(r[c].clone())).cloned().collect();
            Ok(Table { columns: t.columns.clone(), rows })
        }
    }
}

/// Runs `spec` against workspace tables and saves the result table.
pub fn apply_analysis(ws: &mut Workspace, spec: &AnalysisSpec) -> Result<AnalysisOutcome, AgentError> {
    let load = |rel: &str| Table::from_csv(&ws.read_text(rel)?);
    let table = run_analysis(spec, &load)?;
    let output = spec.output().to_string();
    let op = serde_json::to_value(spec)
        .ok()
        .and_then(|v| v.get("op").and_then(|o| o.as_str()).map(str::to_string))
        .unwrap_or_default();
    ws.save_text(&output, &table.to_csv()?, &format!("Result of a {op} over workspace tables ({} rows).", table.rows.len()))?;
    Ok(AnalysisOutcome { output, rows: table.rows.len() })
}
