use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::AgentError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the workspace root.
    pub path: String,
    pub description: String,
}

/// One directory per run holding saved artifacts and `manifest.json`.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

fn unavailable(path: &Path, e: impl std::fmt::Display) -> AgentError {
    AgentError::WorkspaceUnavailable { path: path.to_path_buf(), message: e.to_string() }
}

impl Workspace {
    pub fn create(root: &Path) -> Result<Self, AgentError> {
        fs::create_dir_all(root).map_err(|e| unavailable(root, e))?;
        let ws = Self { root: root.to_path_buf(), entries: Vec::new() };
        ws.write_manifest()?;
        Ok(ws)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).exists()
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    fn write_manifest(&self) -> Result<(), AgentError> {
        let p = self.root.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.entries).map_err(|e| unavailable(&p, e))?;
        fs::write(&p, text).map_err(|e| unavailable(&p, e))
    }

    /// Registers an artifact already written under the root.
    pub fn register(&mut self, rel: &str, description: &str) -> Result<ManifestEntry, AgentError> {
        let entry = ManifestEntry { path: rel.to_string(), description: description.to_string() };
        match self.entries.iter_mut().find(|e| e.path == rel) {
            Some(e) => *e = entry.clone(),
            None => self.entries.push(entry.clone()),
        }
        self.write_manifest()?;
        Ok(entry)
    }

    pub fn save_text(&mut self, rel: &str, text: &str, description: &str) -> Result<ManifestEntry, AgentError> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| unavailable(parent, e))?;
        }
        fs::write(&p, text).map_err(|e| unavailable(&p, e))?;
        self.register(rel, description)
    }

    pub fn save_json<T: Serialize>(&mut self, rel: &str, value: &T, description: &str) -> Result<ManifestEntry, AgentError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| unavailable(&self.path(rel), e))?;
        self.save_text(rel, &text, description)
    }

    pub fn read_text(&self, rel: &str) -> Result<String, AgentError> {
        let p = self.path(rel);
        fs::read_to_string(&p).map_err(|e| unavailable(&p, e))
    }

    /// Appends one JSON value as a line of `rel`.
    pub fn append_jsonl<T: Serialize>(&self, rel: &str, value: &T) -> Result<(), AgentError> {
        let p = self.path(rel);
        let line = serde_json::to_string(value).map_err(|e| unavailable(&p, e))?;
        let mut f = OpenOptions::new().create(true).append(true).open(&p).map_err(|e| unavailable(&p, e))?;
        writeln!(f, "{line}").map_err(|e| unavailable(&p, e))
    }
}
