// SPDX-License-Identifier: Apache-2.0
//! CSV tables, JSON-lines dumps and the run manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

/// One CSV file: a single header row followed by data rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// File name without extension.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width of {}", self.name);
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| num(v)).collect());
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Numeric(format!("csv encoding of {}: {e}", self.name));
        w.write_record(&self.header).map_err(fail)?;
        for r in &self.rows {
            w.write_record(r).map_err(fail)?;
        }
        w.into_inner().map_err(|e| CliError::Numeric(format!("csv encoding of {}: {e}", self.name)))
    }

    pub fn write(&self, dir: &Path) -> Result<String, CliError> {
        let name = self.file_name();
        let path = dir.join(&name);
        fs::write(&path, self.to_bytes()?).map_err(|e| CliError::io(&path, e))?;
        Ok(name)
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses a named column as floats.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column(name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

/// Shortest round-trip decimal form; `NaN` for undefined values.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

/// Label fragment for file names, e.g. `0.53` or `10`.
pub fn label(v: f64) -> String {
    format!("{v}")
}

/// What a manifest replays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Job {
    Figure { name: String },
    Check,
    Sweep { vary: Vec<String> },
}

impl Job {
    pub fn describe(&self) -> String {
        match self {
            Self::Figure { name } => format!("figure {name}"),
            Self::Check => "check".into(),
            Self::Sweep { vary } => format!("sweep {}", vary.join(" ")),
        }
    }
}

/// Written next to every output; replaying it reproduces the data files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub job: Job,
    pub config_path: Option<String>,
    pub master_seed: u64,
    pub shots: Option<u64>,
    pub trajectories: bool,
    pub output_directory: String,
    pub artifact_version: String,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    /// Fully resolved configuration used for the run.
    pub config: RunConfig,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Numeric(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("manifest {}: {e}", path.display())))
    }
}

/// Writes one JSON document per line.
pub fn write_jsonl(path: &Path, records: &[serde_json::Value]) -> Result<(), CliError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| CliError::Numeric(e.to_string()))?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}
