//! Summary JSON, CSV artifacts and console output.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

pub const SCHEMA: u32 = 1;

/// One assertion of a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckLine {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    /// Passes when `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value <= limit, format!("{value:.6e} <= {limit:.3e}"))
    }

    /// Passes when `value ≥ limit`.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value >= limit, format!("{value:.6e} >= {limit:.3e}"))
    }
}

/// Everything a pipeline produces.
#[derive(Debug)]
pub struct Outcome {
    pub command: &'static str,
    pub config: Value,
    pub results: Value,
    pub checks: Vec<CheckLine>,
    /// `(file name, contents)` written next to the summary.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "checks": self.checks,
            "passed": self.passed(),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<String, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(io(&path))?;
        }
        let text = serde_json::to_string_pretty(&self.summary()).expect("summary is valid JSON") + "\n";
        let path = dir.join("summary.json");
        std::fs::write(&path, &text).map_err(io(&path))?;
        Ok(text)
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable result")
}
