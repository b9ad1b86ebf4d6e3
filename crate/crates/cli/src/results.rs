//! The versioned results document written by `run`, `verify` and `bench`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use mopg::algorithm::RunTrace;
use mopg::rates::{RateReport, TauEstimate};
use serde::{Deserialize, Serialize};

use crate::problem_file::ProblemFile;

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub build_id: String,
    pub seed: u64,
}

impl Environment {
    pub fn new(seed: u64) -> Self {
        Self {
            build_id: format!("mopg-cli {}", env!("CARGO_PKG_VERSION")),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub schema_version: String,
    pub problem_id: String,
    /// Full problem description, so later commands need no other input.
    pub problem: ProblemFile,
    pub x0: Vec<f64>,
    /// Carries the config echo alongside the iterate records.
    pub trace: RunTrace,
    #[serde(default)]
    pub reports: Vec<RateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_estimate: Option<TauEstimate>,
    pub environment: Environment,
}

impl ResultsDocument {
    pub fn new(problem: ProblemFile, x0: Vec<f64>, trace: RunTrace, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            problem_id: trace.problem_id.clone(),
            problem,
            x0,
            trace,
            reports: Vec::new(),
            tau_estimate: None,
            environment: Environment::new(seed),
        }
    }

    /// Replaces any earlier report for the same theorem.
    pub fn merge_report(&mut self, report: RateReport) {
        match self.reports.iter_mut().find(|r| r.theorem == report.theorem) {
            Some(slot) => *slot = report,
            None => self.reports.push(report),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).context("results document is not JSON")?;
        let version = raw
            .get("schema_version")
            .and_then(|v| v.as_str())
            .context("results document has no schema_version")?;
        if version.split('.').next() != SCHEMA_VERSION.split('.').next() {
            bail!("unsupported results schema version {version:?} (expected {SCHEMA_VERSION})");
        }
        serde_json::from_str(text).context("malformed results document")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).with_context(|| format!("writing {}", path.display()))
    }
}
