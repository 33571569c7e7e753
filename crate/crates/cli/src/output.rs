use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::Config;
use crate::error::CliError;

/// Collects written files and emits `manifest.json` in the output directory.
pub struct Outputs {
    root: PathBuf,
    files: Vec<String>,
    summary: Map<String, Value>,
}

impl Outputs {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Write {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
            summary: Map::new(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Records a file written by someone else.
    pub fn record(&mut self, rel: impl Into<String>) {
        self.files.push(rel.into());
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|source| CliError::Write {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        fs::write(&p, contents).map_err(|source| CliError::Write { path: p, source })?;
        self.record(rel);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn finish(self, command: &str, cfg: &Config) -> Result<(), CliError> {
        let manifest = json!({
            "command": command,
            "seed": cfg.seed,
            "outputs": self.files,
            "summary": self.summary,
            "config": cfg,
        });
        let p = self.root.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        fs::write(&p, text + "\n").map_err(|source| CliError::Write { path: p, source })
    }
}

/// Builds a CSV with a header and rows, using shortest round-trip float text.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Space-padded table for terminals and text reports.
pub fn aligned_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    out += &line(
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    );
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}
