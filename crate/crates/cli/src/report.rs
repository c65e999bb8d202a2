//! The versioned JSON report envelope and its CSV summary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Crate version, plus the `git describe` string when the build provided one.
pub const VERSION: &str = match option_env!("CLONELAB_GIT_DESCRIBE") {
    Some(v) => v,
    None => env!("CARGO_PKG_VERSION"),
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub check: String,
    pub observed: f64,
    pub bound: Option<f64>,
    pub pass: bool,
}

impl SummaryRow {
    pub fn new(check: impl Into<String>, observed: f64, bound: Option<f64>, pass: bool) -> Self {
        Self { check: check.into(), observed, bound, pass }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub pass: bool,
    pub summary: Vec<SummaryRow>,
    pub results: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl Report {
    pub fn new(command: &str, config: &impl Serialize, results: &impl Serialize, summary: Vec<SummaryRow>) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            tool: "clonelab".into(),
            version: VERSION.into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            pass: summary.iter().all(|r| r.pass),
            summary,
            results: serde_json::to_value(results)?,
            wall_clock_ms: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for row in &self.summary {
            w.serialize(row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Serialize(format!("{other:?}")),
    }
}
