use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{fit_loglog_slope, Check, SuiteReport};
use crate::error::{Error, Result};
use crate::model::{sigma_bump, trapezoid_weights, Field, Grid2D, ModelParams, WeightSpec};
use crate::semigroups::{composite_apply, Ordering, QuadratureSpec};

/// Allowed distance between a fitted exponent and `-k/2`.
pub const EXPONENT_TOL: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub k: u32,
    pub times: Vec<f64>,
    /// `‖∂ₓᵏ S(t)h‖ / ‖h‖` per time.
    pub ratios: Vec<f64>,
    pub fitted_exponent: f64,
    /// `-k/2`.
    pub target_exponent: f64,
}

impl SmoothingReport {
    /// Blow-up no faster than `t^{-k/2}`, up to the tolerance.
    pub fn within_bound(&self) -> bool {
        self.fitted_exponent >= self.target_exponent - EXPONENT_TOL
    }

    /// Fitted exponent within the tolerance of `-k/2`.
    pub fn matches_target(&self) -> bool {
        (self.fitted_exponent - self.target_exponent).abs() <= EXPONENT_TOL
    }
}

/// Weighted L² norm of `∂ₓᵏ f` (centred differences) over nodes at least
/// `margin` from the x ends.
fn derivative_norm(f: &Field, k: u32, w: &WeightSpec, margin: f64) -> f64 {
    let g = f.grid();
    let dx = g.dx();
    let ws = trapezoid_weights(g.sigma());
    let (lo, hi) = (g.x_min() + margin, g.x_max() - margin);
    let mut sum = 0.0;
    for i in 0..g.n_sigma() {
        let r = f.row(i);
        for j in 1..g.n_x() - 1 {
            let x = g.x()[j];
            if x < lo || x > hi {
                continue;
            }
            let d = match k {
                0 => r[j],
                1 => (r[j + 1] - r[j - 1]) / (2.0 * dx),
                _ => (r[j + 1] - 2.0 * r[j] + r[j - 1]) / (dx * dx),
            };
            let wt = w.weight(x).powi(-2);
            sum += ws[i] * dx * wt * d * d;
        }
    }
    sum.sqrt()
}

/// Fits the power of `t` in `‖∂ₓᵏ S(t)h‖ / ‖h‖` over `t ∈ {2⁻⁸, …, 2⁻¹}`.
/// Norms are taken over nodes at least `margin` from the x ends.
pub fn check_smoothing_decay(
    p: &ModelParams,
    h: &Field,
    q: &QuadratureSpec,
    k: u32,
    margin: f64,
) -> Result<SmoothingReport> {
    Ok(decay_reports(p, h, q, &[k], margin)?.remove(0))
}

/// As [`check_smoothing_decay`] for several orders sharing one set of
/// semigroup evaluations.
pub fn decay_reports(p: &ModelParams, h: &Field, q: &QuadratureSpec, ks: &[u32], margin: f64) -> Result<Vec<SmoothingReport>> {
    if ks.is_empty() || ks.iter().any(|&k| k > 2) {
        return Err(Error::InvalidArgument(format!("derivative orders must be 0, 1 or 2, got {ks:?}")));
    }
    let w = WeightSpec::from(p);
    let hn = derivative_norm(h, 0, &w, margin);
    if !(hn > 0.0) {
        return Err(Error::InvalidArgument("datum vanishes on the measured region".into()));
    }
    let times: Vec<f64> = (1..=8).rev().map(|e| 2f64.powi(-e)).collect();
    let mut ratios = vec![Vec::with_capacity(times.len()); ks.len()];
    for &t in &times {
        let s = composite_apply(p, t, h, q, Ordering::HeatAfterTransport)?.field;
        for (r, &k) in ratios.iter_mut().zip(ks) {
            r.push(derivative_norm(&s, k, &w, margin) / hn);
        }
    }
    Ok(ks
        .iter()
        .zip(ratios)
        .map(|(&k, ratios)| SmoothingReport {
            k,
            fitted_exponent: fit_loglog_slope(&times, &ratios).unwrap_or(f64::NAN),
            times: times.clone(),
            ratios,
            target_exponent: -(k as f64) / 2.0,
        })
        .collect())
}

fn smoothing_grid(p: &ModelParams) -> Result<Arc<Grid2D>> {
    Ok(Arc::new(Grid2D::uniform(p, 21, -6.0, 6.0, 4801)?))
}

/// Call payoff `(e^x - 1)⁺` times a σ-bump, smoothed by the zero-volvol
/// semigroup, for `k = 0, 1, 2`; plus a probe with data oscillating at the
/// smoothing scale of each time, which realises the operator-norm rate.
pub fn run_smoothing_suite(p: &ModelParams, q: &QuadratureSpec) -> Result<SuiteReport> {
    p.validate()?;
    let g = smoothing_grid(p)?;
    let centre = 0.5 * (p.alpha + p.beta);
    let radius = 0.3 * (p.beta - p.alpha);
    let call = Field::from_fn(g.clone(), |s, x| sigma_bump(s, centre, radius) * (x.exp() - 1.0).max(0.0));
    let margin = 3.0;
    let mut checks = vec![];
    let mut reports = decay_reports(p, &call, q, &[0, 1, 2], margin)?.into_iter();
    let r0 = reports.next().expect("three reports");
    let spread = r0.ratios.iter().cloned().fold(0.0f64, f64::max) / r0.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(Check::new("call_k0_bounded", spread, 2.0).with_note("max/min ratio over t"));
    for r in reports {
        let k = r.k;
        checks.push(
            Check::new(format!("call_k{k}_exponent"), (r.fitted_exponent - r.target_exponent).abs(), EXPONENT_TOL)
                .with_note(format!("fitted {:.3}, target {}", r.fitted_exponent, r.target_exponent)),
        );
        checks.push(
            Check::new(
                format!("call_k{k}_no_faster_blowup"),
                (r.target_exponent - EXPONENT_TOL - r.fitted_exponent).max(0.0),
                0.0,
            )
            .with_note(format!("fitted {:.3}", r.fitted_exponent)),
        );
        let probe = operator_norm_probe(p, &g, q, k)?;
        checks.push(
            Check::new(format!("probe_k{k}_exponent"), (probe - r.target_exponent).abs(), EXPONENT_TOL)
                .with_note(format!("fitted {probe:.3}")),
        );
    }
    Ok(SuiteReport::new("smoothing", p, Some(&g), None, checks))
}

/// For each `t`, data `cos(ω x) e^{-x²/2}` times a narrow σ-bump, with
/// `ω² = k / (2τ)` and `τ = 𝔇(t, σ_c)`: the frequency maximising
/// `ωᵏ e^{-ω²τ}`. Returns the fitted exponent of `‖∂ₓᵏ S(t)h_t‖ / ‖h_t‖`.
fn operator_norm_probe(p: &ModelParams, g: &Arc<Grid2D>, q: &QuadratureSpec, k: u32) -> Result<f64> {
    let w = WeightSpec::from(p);
    let centre = 0.5 * (p.alpha + p.beta);
    let radius = 0.1 * (p.beta - p.alpha);
    let times: Vec<f64> = (1..=8).rev().map(|e| 2f64.powi(-e)).collect();
    let mut ratios = vec![];
    for &t in &times {
        let tau = crate::coeffs::variance_with(p.kappa, p.theta, t, centre);
        let omega = (k as f64 / (2.0 * tau)).sqrt();
        let h = Field::from_fn(g.clone(), |s, x| sigma_bump(s, centre, radius) * (omega * x).cos() * (-0.5 * x * x).exp());
        let s = composite_apply(p, t, &h, q, Ordering::HeatAfterTransport)?.field;
        ratios.push(derivative_norm(&s, k, &w, 3.0) / derivative_norm(&h, 0, &w, 3.0));
    }
    Ok(fit_loglog_slope(&times, &ratios).unwrap_or(f64::NAN))
}
