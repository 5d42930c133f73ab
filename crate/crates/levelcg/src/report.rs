//! Run reports (JSON), iteration traces (CSV) and sweep tables (CSV and
//! markdown).
//!
//! Report fields follow the experiment tables: `objective` is f(x_N),
//! `constraint_norm` is ||[h(x_N)]_+||_2 over all model constraints, and for
//! IMRT `group_violation` / `clinical_violation` split it into the
//! group-sparsity row and the CVaR rows. Floats are written in shortest
//! round-trip form, so equal runs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    /// The level method met its accuracy target.
    Converged,
    /// A CGO iteration budget ran out first.
    BudgetExhausted,
    /// Fixed-length methods (DNCG, IPP-LCG) ran all their steps.
    Completed,
    Failed,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::BudgetExhausted => "budget-exhausted",
            RunStatus::Completed => "completed",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Iterations {
    pub outer: u64,
    /// CGO iterations summed over the run.
    pub inner_total: u64,
    pub dncg: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktRow {
    pub complementarity: f64,
    pub stationarity: f64,
    pub proximity: f64,
    pub infeasibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub kind: String,
    pub structure: String,
    pub dose_gy: f64,
    pub quantile: f64,
    pub violating_fraction: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub model: String,
    pub algo: String,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub card_violation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_violation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clinical_violation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wolfe_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktRow>,
    pub iterations: Iterations,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<CriterionRow>,
    /// Decision vector of the returned point.
    pub solution: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunReport {
    pub fn failed(model: &str, algo: &str, seed: u64, error: String) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            model: model.into(),
            algo: algo.into(),
            seed,
            status: RunStatus::Failed,
            error: Some(error),
            dim: 0,
            objective: None,
            constraint_norm: None,
            risk: None,
            assets: None,
            psi: None,
            card_violation: None,
            phi: None,
            group_violation: None,
            clinical_violation: None,
            wolfe_gap: None,
            kkt: None,
            iterations: Iterations::default(),
            criteria: Vec::new(),
            solution: Vec::new(),
            wall_time_s: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| BenchError::io(path, e))
    }
}

/// Per-iteration trace with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Stage tag used in the file name of multi-stage runs.
    pub stage: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Trace {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| BenchError::io(path, e))
    }
}

/// `dir/stem.csv` -> `dir/stem-<stage>.csv`.
pub fn staged_path(base: &Path, stage: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "trace".into());
    let ext = base.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    base.with_file_name(format!("{stem}-{stage}.{ext}"))
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

/// One row per run, with the experiment-table columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub reports: Vec<RunReport>,
}

const SWEEP_HEADER: [&str; 16] = [
    "run", "model", "algo", "seed", "phi", "psi", "status", "f(x_N)", "||h||_2", "||h_s||_2", "||h_c||_2", "risk",
    "assets", "card_vio", "outer", "cgo_iters",
];

impl SweepTable {
    fn cells(&self) -> Vec<Vec<String>> {
        self.reports
            .iter()
            .enumerate()
            .map(|(i, r)| {
                vec![
                    (i + 1).to_string(),
                    r.model.clone(),
                    r.algo.clone(),
                    r.seed.to_string(),
                    opt(&r.phi),
                    opt(&r.psi),
                    r.status.name().to_string(),
                    opt(&r.objective),
                    opt(&r.constraint_norm),
                    opt(&r.group_violation),
                    opt(&r.clinical_violation),
                    opt(&r.risk),
                    opt(&r.assets),
                    opt(&r.card_violation),
                    r.iterations.outer.to_string(),
                    r.iterations.inner_total.to_string(),
                ]
            })
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(SWEEP_HEADER)?;
        for r in self.cells() {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| BenchError::io(path, e))
    }

    /// Markdown table; floats rounded to 4 significant digits.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| {} |", SWEEP_HEADER.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(SWEEP_HEADER.len()));
        for row in self.cells() {
            let shown: Vec<String> = row
                .iter()
                .map(|c| match c.parse::<f64>() {
                    Ok(v) if c.contains('.') || c.contains('e') => format!("{v:.4e}").replace("e0", ""),
                    _ => c.clone(),
                })
                .collect();
            let _ = writeln!(s, "| {} |", shown.join(" | "));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staged_names() {
        assert_eq!(staged_path(Path::new("out/t.csv"), "lcg"), PathBuf::from("out/t-lcg.csv"));
        assert_eq!(staged_path(Path::new("t"), "dncg"), PathBuf::from("t-dncg.csv"));
    }

    #[test]
    fn failed_report_has_error_and_no_metrics() {
        let r = RunReport::failed("card-convex", "lcg", 1, "boom".into());
        let json = r.to_json().unwrap();
        assert!(json.contains("\"status\": \"failed\""));
        assert!(json.contains("\"error\": \"boom\""));
        assert!(!json.contains("objective"));
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn markdown_has_one_line_per_run() {
        let mut a = RunReport::failed("imrt-convex", "lcg", 1, "x".into());
        a.objective = Some(0.123456789);
        let t = SweepTable { reports: vec![a.clone(), a] };
        let md = t.to_markdown();
        assert_eq!(md.lines().count(), 4);
        assert!(md.contains("1.2346e-1"), "{md}");
    }
}
