use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::unified::UnifiedRecord;
use super::FederationError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub markdown: PathBuf,
}

impl Manifest {
    pub fn paths(&self) -> Vec<PathBuf> {
        vec![self.json.clone(), self.csv.clone(), self.markdown.clone()]
    }
}

fn unavailable(path: &Path, e: impl std::fmt::Display) -> FederationError {
    FederationError::WorkspaceUnavailable { path: path.to_path_buf(), message: e.to_string() }
}

/// Writes `<stem>.json` (full records), `<stem>.csv` (one row per record) and
/// `<stem>.md` (summary) into `dir`.
pub fn persist_results(records: &[UnifiedRecord], dir: &Path, stem: &str) -> Result<Manifest, FederationError> {
    fs::create_dir_all(dir).map_err(|e| unavailable(dir, e))?;
    let m = Manifest {
        json: dir.join(format!("{stem}.json")),
        csv: dir.join(format!("{stem}.csv")),
        markdown: dir.join(format!("{stem}.md")),
    };
    let json = serde_json::to_string_pretty(records).map_err(|e| unavailable(&m.json, e))?;
    fs::write(&m.json, json).map_err(|e| unavailable(&m.json, e))?;

    let mut w = csv::Writer::from_path(&m.csv).map_err(|e| unavailable(&m.csv, e))?;
    w.write_record(["rank", "name", "kind", "origin", "sources", "identifiers"])
        .map_err(|e| unavailable(&m.csv, e))?;
    for (i, r) in records.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.name.clone(),
            r.kind.to_string(),
            r.origin.clone(),
            r.sources.join(";"),
            r.xref_string(),
        ])
        .map_err(|e| unavailable(&m.csv, e))?;
    }
    w.flush().map_err(|e| unavailable(&m.csv, e))?;

    let mut md = format!(
        "# {stem}\n\n{} result{}\n",
        records.len(),
        if records.len() == 1 { "" } else { "s" }
    );
    if !records.is_empty() {
        md.push_str("\n| # | name | sources | identifiers |\n|---|---|---|---|\n");
        for (i, r) in records.iter().enumerate() {
            writeln!(md, "| {} | {} | {} | {} |", i + 1, r.name, r.sources.join(", "), r.xref_string()).ok();
        }
    }
    fs::write(&m.markdown, md).map_err(|e| unavailable(&m.markdown, e))?;
    Ok(m)
}

pub fn read_persisted(json: &Path) -> Result<Vec<UnifiedRecord>, FederationError> {
    let text = fs::read_to_string(json).map_err(|e| unavailable(json, e))?;
    serde_json::from_str(&text).map_err(|e| FederationError::Parse {
        source_id: json.display().to_string(),
        message: e.to_string(),
    })
}
