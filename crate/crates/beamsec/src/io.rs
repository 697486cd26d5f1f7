//! Artifact writing: row tables as CSV or JSON, plus a provenance sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use beamsec_core::channel::CouplingMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{Format, ScenarioConfig};
use crate::error::RunError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn read_coupling(path: &Path) -> Result<CouplingMatrix, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_coupling(path: &Path, omega: &CouplingMatrix) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(omega).map_err(|e| RunError::io(path.display(), e))?;
    fs::write(path, text).map_err(|e| RunError::io(path.display(), e))
}

/// A point that produced no numbers, with the reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub snr_db: Option<f64>,
    pub error: String,
}

/// Provenance written next to every artifact set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_version: u32,
    pub command: String,
    pub beamsec_version: String,
    /// SHA-256 of the effective configuration (after CLI overrides).
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub workers: usize,
    pub files: Vec<String>,
    pub failures: Vec<Failure>,
    /// Command-specific results (fits, pass/fail counts).
    pub summary: serde_json::Value,
}

impl Sidecar {
    pub fn new(command: &str, config: &ScenarioConfig, workers: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            beamsec_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            workers,
            files: Vec::new(),
            failures: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }
}

/// Writes artifacts under one output directory.
pub struct ArtifactWriter {
    dir: PathBuf,
    format: Format,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: &Path, format: Format) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir.display(), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `stem.csv` or `stem.json` depending on the format.
    pub fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<PathBuf, RunError> {
        let name = match self.format {
            Format::Csv => format!("{stem}.csv"),
            Format::Json => format!("{stem}.json"),
        };
        let path = self.dir.join(&name);
        match self.format {
            Format::Csv => write_csv(&path, rows)?,
            Format::Json => self.write_json_file(&path, rows)?,
        }
        self.written.push(name);
        Ok(path)
    }

    /// A JSON document regardless of the table format.
    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf, RunError> {
        let path = self.dir.join(name);
        self.write_json_file(&path, value)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    fn write_json_file<T: Serialize + ?Sized>(&self, path: &Path, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::io(path.display(), e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| RunError::io(path.display(), e))
    }

    /// Writes `<command>.meta.json` listing everything written so far.
    pub fn finish(mut self, mut sidecar: Sidecar) -> Result<PathBuf, RunError> {
        sidecar.files = std::mem::take(&mut self.written);
        let path = self.dir.join(format!("{}.meta.json", sidecar.command));
        self.write_json_file(&path, &sidecar)?;
        Ok(path)
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| RunError::io(path.display(), e))?;
    for r in rows {
        w.serialize(r).map_err(|e| RunError::io(path.display(), e))?;
    }
    w.flush().map_err(|e| RunError::io(path.display(), e))
}
