//! CSV rows and JSON run summaries.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use ion_reservoir::fock::DensityMatrix;
use ion_reservoir::metrics::{self, TAIL_WARN};
use ion_reservoir::{fock, Result as CoreResult};
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Rows above this trace error are flagged.
pub const ROW_TRACE_TOL: f64 = 1e-9;

/// One stage of an evolution, or the single row of a steady-state run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub n: String,
    pub fidelity_inf: Option<f64>,
    pub fidelity_0: Option<f64>,
    pub mean_occupation: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
    pub tail_mass: f64,
    pub warnings: String,
}

impl ResultRow {
    /// Diagnostics of `rho`, with fidelities filled in by the caller.
    pub fn measure(n: impl ToString, rho: &DensityMatrix) -> CoreResult<Self> {
        let d = rho.diagnostics()?;
        let tail = metrics::tail_mass(rho, 2);
        let mut w = Warnings::default();
        w.flag(d.trace_error > ROW_TRACE_TOL, "trace");
        w.flag(!d.hermitian_ok(), "hermiticity");
        w.flag(d.min_eigenvalue < -fock::POSITIVITY_TOL, "positivity");
        w.flag(tail > TAIL_WARN, "truncation");
        Ok(Self {
            n: n.to_string(),
            fidelity_inf: None,
            fidelity_0: None,
            mean_occupation: metrics::mean_occupation(rho),
            trace_error: d.trace_error,
            min_eigenvalue: d.min_eigenvalue,
            tail_mass: tail,
            warnings: w.into_string(),
        })
    }

    pub fn add_warning(&mut self, tag: &str) {
        if self.warnings.is_empty() {
            self.warnings = tag.to_owned();
        } else {
            self.warnings.push(';');
            self.warnings.push_str(tag);
        }
    }

    pub fn has_warning(&self, tag: &str) -> bool {
        self.warnings.split(';').any(|w| w == tag)
    }

    /// Trace and positivity within tolerance, or flagged.
    pub fn guarded(&self) -> bool {
        let ok = self.trace_error <= ROW_TRACE_TOL && self.min_eigenvalue >= -fock::POSITIVITY_TOL;
        ok || self.has_warning("trace") || self.has_warning("positivity")
    }
}

/// Semicolon-separated warning tags.
#[derive(Debug, Default, Clone)]
pub struct Warnings(Vec<&'static str>);

impl Warnings {
    pub fn flag(&mut self, cond: bool, tag: &'static str) {
        if cond && !self.0.contains(&tag) {
            self.0.push(tag);
        }
    }

    pub fn into_string(self) -> String {
        self.0.join(";")
    }
}

/// Where a run writes its table and summary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

impl OutputPaths {
    pub fn new(csv: impl Into<PathBuf>) -> Self {
        let csv = csv.into();
        let summary = csv.with_extension("json");
        Self { csv, summary }
    }

    /// Sibling table, e.g. `run.csv` → `run_unprotected.csv`.
    pub fn sibling(&self, suffix: &str) -> PathBuf {
        let stem = self
            .csv
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let ext = self
            .csv
            .extension()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into());
        self.csv.with_file_name(format!("{stem}_{suffix}.{ext}"))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<File, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map_err(|e| io_err(path, e))
}

/// Streams serializable rows to a CSV file with a header from the first row.
pub struct RowWriter {
    inner: csv::Writer<File>,
    rows: usize,
}

impl RowWriter {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        Ok(Self {
            inner: csv::Writer::from_writer(create(path)?),
            rows: 0,
        })
    }

    pub fn write<T: Serialize>(&mut self, row: &T) -> Result<(), CliError> {
        self.inner.serialize(row)?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn finish(mut self) -> Result<usize, CliError> {
        self.inner.flush().map_err(|e| CliError::Io {
            path: "csv output".into(),
            source: e,
        })?;
        Ok(self.rows)
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<usize, CliError> {
    let mut w = RowWriter::create(path)?;
    for r in rows {
        w.write(r)?;
    }
    w.finish()
}

/// Pretty JSON with sorted keys, so identical runs give identical bytes.
pub fn write_summary(path: &Path, summary: &Value) -> Result<(), CliError> {
    let mut f = create(path)?;
    let text = serde_json::to_string_pretty(summary)?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| io_err(path, e))
}

/// Name, pass flag and measured value of an inline check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Guard {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Guard {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub fn versions() -> Value {
    serde_json::json!({
        "ion-reservoir-cli": env!("CARGO_PKG_VERSION"),
    })
}
