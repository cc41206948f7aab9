//! Identity suites, oracle comparisons and the volvol error study.

mod corrected;
mod error_study;
mod hadamard;
mod identities;
mod oracle;
mod smoothing;

use serde::{Deserialize, Serialize};

pub use corrected::{check_corrected_derivative, CorrectedReport, TensorGaussian};
pub use error_study::{
    default_study, fit_loglog_slope, run_error_study, study_datum, ErrorStudyReport, StudySetup, StudyStatus,
};
pub use hadamard::{check_hadamard, Dual, SigmaProfileFn};
pub use identities::{
    call_quadrature_oracle, run_identity_suite, scalar_identity_checks, transport_bound_ratio,
    identity_test_field,
};
pub use oracle::{run_garding_suite, run_oracle_suite, triple_oracle, OracleSetup, TripleOracle};
pub use smoothing::{check_smoothing_decay, decay_reports, run_smoothing_suite, SmoothingReport};

use crate::model::{Grid2D, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `residual` is finite and at most `tol`.
    pub fn new(id: impl Into<String>, residual: f64, tol: f64) -> Self {
        Self {
            id: id.into(),
            residual,
            tol,
            pass: residual.is_finite() && residual <= tol,
            note: None,
        }
    }

    /// Lower-bound check: passes when `value > bound`. The value is stored as
    /// the residual and the bound as the tolerance.
    pub fn lower(id: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            id: id.into(),
            residual: value,
            tol: bound,
            pass: value.is_finite() && value > bound,
            note: Some(format!("lower bound {bound}")),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        self.note = Some(match self.note.take() {
            Some(old) => format!("{old}; {note}"),
            None => note,
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub params: serde_json::Value,
    pub grid: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    /// `"pass"` iff every check passed.
    pub verdict: String,
}

impl SuiteReport {
    pub fn new(suite: &str, p: &ModelParams, grid: Option<&Grid2D>, seed: Option<u64>, mut checks: Vec<Check>) -> Self {
        checks.sort_by(|a, b| a.id.cmp(&b.id));
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Self {
            suite: suite.to_string(),
            params: serde_json::to_value(p).expect("params serialise"),
            grid: grid.map_or(serde_json::Value::Null, grid_summary),
            seed,
            checks,
            verdict: if pass { "pass" } else { "fail" }.to_string(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == "pass"
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Aligned human-readable table.
    pub fn to_text(&self) -> String {
        let w = self.checks.iter().map(|c| c.id.len()).max().unwrap_or(5).max(5);
        let mut s = format!("suite: {}\n", self.suite);
        s += &format!("{:<w$}  {:>12}  {:>10}  result\n", "check", "residual", "tol");
        for c in &self.checks {
            s += &format!(
                "{:<w$}  {:>12.4e}  {:>10.2e}  {}{}\n",
                c.id,
                c.residual,
                c.tol,
                if c.pass { "pass" } else { "FAIL" },
                c.note.as_ref().map(|n| format!("  ({n})")).unwrap_or_default()
            );
        }
        s += &format!("verdict: {}\n", self.verdict);
        s
    }
}

pub fn grid_summary(g: &Grid2D) -> serde_json::Value {
    let s = g.sigma();
    serde_json::json!({
        "n_sigma": g.n_sigma(),
        "n_x": g.n_x(),
        "sigma_min": s[0],
        "sigma_max": s[s.len() - 1],
        "x_min": g.x_min(),
        "x_max": g.x_max(),
    })
}
