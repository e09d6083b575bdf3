//! Machine-readable run reports and their re-verification.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attribution::{LocoFold, LocoReport, PairwiseCell, SageReport};
use crate::dip::{DipResult, DipTerms};
use crate::error::{DipError, Result};

pub const SCHEMA_VERSION: &str = "dip-report/1";

/// Relative tolerance used when re-checking identities from serialized numbers.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReportBody {
    Decompose { result: DipResult<f64> },
    /// `report` is in the reported units; `raw_folds` keeps the unnormalized per-fold values.
    Loco { report: LocoReport<f64>, raw_folds: Vec<LocoFold<f64>> },
    Sage { report: SageReport<f64> },
    Pairwise { cells: Vec<PairwiseCell<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    /// Echo of the run configuration.
    pub config: serde_json::Value,
    pub normalized: bool,
    pub body: ReportBody,
}

impl Report {
    pub fn new(command: &str, config: serde_json::Value, normalized: bool, body: ReportBody) -> Self {
        Self { schema_version: SCHEMA_VERSION.into(), command: command.into(), config, normalized, body }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite numbers and strings")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| DipError::InvalidDataset(format!("unreadable report: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DipError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| DipError::Io { path: path.into(), source };
    let mut tmp_name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(io_err)?;
    file.write_all(bytes).and_then(|_| file.sync_all()).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

/// One failed check: `residual` exceeded the tolerance for `identity` at `location`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub location: String,
    pub identity: String,
    pub residual: f64,
}

struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    fn check(&mut self, location: &str, identity: &str, lhs: f64, rhs: &[f64]) {
        let rhs_sum: f64 = rhs.iter().sum();
        let scale = rhs.iter().chain([&lhs]).fold(1.0f64, |m, x| m.max(x.abs()));
        let residual = lhs - rhs_sum;
        if !(residual.abs() <= IDENTITY_TOLERANCE * scale) {
            self.violations.push(Violation { location: location.into(), identity: identity.into(), residual });
        }
    }

    fn terms(&mut self, location: &str, t: &DipTerms<f64>) {
        self.check(location, "psi = v_joint - v_j - v_jbar", t.psi, &[t.v_joint, -t.v_j, -t.v_jbar]);
        self.check(location, "psi = interaction_surplus - dep", t.psi, &[t.interaction_surplus, -t.dep]);
        self.check(location, "dep = cross_pred + covariance", t.dep, &[t.cross_pred, t.covariance]);
    }

    fn loco(&mut self, location: &str, report_entries: &[crate::attribution::LocoEntry<f64>]) {
        for e in report_entries {
            let at = format!("{location}/{}", e.name);
            self.check(&at, "loco = standalone + interaction - dependencies", e.loco, &[
                e.standalone,
                e.interaction,
                -e.dependencies,
            ]);
        }
    }
}

/// Re-check the schema version and every additivity identity. An empty list means the report is consistent.
pub fn verify_report(report: &Report) -> Vec<Violation> {
    let mut c = Checker { violations: Vec::new() };
    if report.schema_version != SCHEMA_VERSION {
        c.violations.push(Violation {
            location: "schema_version".into(),
            identity: format!("schema_version = {SCHEMA_VERSION} (found {})", report.schema_version),
            residual: f64::NAN,
        });
    }
    match &report.body {
        ReportBody::Decompose { result } => c.terms("result", &result.terms),
        ReportBody::Pairwise { cells } => {
            for cell in cells {
                c.terms(&format!("pair/{}/{}", cell.names.0, cell.names.1), &cell.result.terms);
            }
        }
        ReportBody::Loco { report, raw_folds } => {
            c.loco("entries", &report.entries);
            for fold in &report.folds {
                c.loco(&format!("fold{}", fold.fold), &fold.entries);
            }
            for fold in raw_folds {
                c.loco(&format!("raw_fold{}", fold.fold), &fold.entries);
            }
        }
        ReportBody::Sage { report } => {
            for e in &report.entries {
                c.check(&format!("entries/{}", e.name), "phi = standalone + avg_interaction - avg_dependencies", e.phi, &[
                    e.standalone,
                    e.avg_interaction,
                    -e.avg_dependencies,
                ]);
            }
            for (o, row) in report.surpluses.iter().enumerate() {
                c.check(&format!("ordering{o}"), "sum of surpluses = v_full", report.v_full, row);
            }
            if report.exact {
                let phis: Vec<f64> = report.entries.iter().map(|e| e.phi).collect();
                c.check("entries", "sum of phi = v_full", report.v_full, &phis);
            }
        }
    }
    c.violations
}
