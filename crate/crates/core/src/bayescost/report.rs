use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub margin: f64,
    pub stderr: f64,
    pub passed: bool,
    pub detail: String,
}

/// A list of named checks, rendered as JSON or aligned plain text.
#[derive(Clone, Debug, Default, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: impl Into<String>, margin: f64, stderr: f64, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckRecord {
            check: check.into(),
            margin,
            stderr,
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let width = self.checks.iter().map(|c| c.check.len()).max().unwrap_or(5).max(5);
        let mut out = format!("{:<width$}  {:>14}  {:>12}  result\n", "check", "margin", "stderr");
        for c in &self.checks {
            out.push_str(&format!(
                "{:<width$}  {:>14.6e}  {:>12.4e}  {}{}\n",
                c.check,
                c.margin,
                c.stderr,
                if c.passed { "pass" } else { "FAIL" },
                if c.detail.is_empty() { String::new() } else { format!("  ({})", c.detail) }
            ));
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.txt` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::write(dir.join(format!("{stem}.json")), self.to_json()?)?;
        fs::write(dir.join(format!("{stem}.txt")), self.to_text())?;
        Ok(())
    }
}
