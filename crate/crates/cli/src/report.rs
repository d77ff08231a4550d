use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// One pass/fail check with the compared value and its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// How value and tolerance are compared.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation: Option<&'static str>,
}

#[derive(Debug, Default)]
pub struct Checks(pub BTreeMap<String, Check>);

impl Checks {
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.0.insert(name.into(), Check { passed: value <= tol, value: Some(value), tolerance: Some(tol), relation: Some("<=") });
    }

    pub fn flag(&mut self, name: impl Into<String>, passed: bool) {
        self.0.insert(name.into(), Check { passed, value: None, tolerance: None, relation: None });
    }

    pub fn all_passed(&self) -> bool {
        self.0.values().all(|c| c.passed)
    }
}

/// Output of one subcommand before timing is attached.
pub struct Outcome {
    pub results: Value,
    pub checks: Checks,
    /// CSV body when `--format csv` was requested.
    pub csv: Option<String>,
    /// Non-reproducible per-part timings.
    pub timing: Option<Value>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub results: Value,
    pub checks: BTreeMap<String, Check>,
    pub passed: bool,
    /// Wall-clock data, kept apart so the rest of the report is reproducible.
    pub timing: Timing,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub elapsed_s: f64,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parts: Option<Value>,
}

/// Writes to stdout, or to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn emit(body: &str, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.write_all(b"\n")?;
        }
        Some(p) => {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(body.as_bytes())?;
            tmp.write_all(b"\n")?;
            tmp.persist(p)?;
        }
    }
    Ok(())
}
