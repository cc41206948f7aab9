use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeffs::{flow_with, variance_dsigma_with, variance_with};
use crate::error::{Error, Result};
use crate::model::{Field, Grid2D, ModelParams};
use crate::semigroups::{heat_apply, QuadratureSpec};

/// `ξ(σ, x) = exp(-(σ - cσ)²/(2wσ²)) · exp(-(x - cₓ)²/(2wₓ²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorGaussian {
    pub sigma_center: f64,
    pub sigma_width: f64,
    pub x_center: f64,
    pub x_width: f64,
}

impl TensorGaussian {
    fn sigma_part(&self, s: f64) -> (f64, f64) {
        let z = (s - self.sigma_center) / self.sigma_width;
        let v = (-0.5 * z * z).exp();
        (v, -z / self.sigma_width * v)
    }

    fn x_part(&self, x: f64) -> f64 {
        let z = (x - self.x_center) / self.x_width;
        (-0.5 * z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedReport {
    pub n_sigma: usize,
    pub n_x: usize,
    /// Discrete L² norm of the identity's defect over the interior box.
    pub residual: f64,
    /// Largest defect on the σ node nearest θ.
    pub theta_column_residual: f64,
    /// `∂σ𝔇(t, θ) = θ t E(κt)`, nonzero for `θ > 0`.
    pub dsigma_variance_at_theta: f64,
}

/// Compares `∂σ S(t)ξ` (centred σ-differences) with
/// `e^{-κt} S(t)∂σξ + ∂σ𝔇(t)·B S(t)ξ` (B by centred x-differences).
///
/// The transport factor is sampled exactly from the analytic profile, so the
/// only approximations are the heat quadrature and the two difference
/// operators. The defect is measured on nodes at least `x_margin` from the x
/// ends, away from where the truncated grid clamps the heat action.
pub fn check_corrected_derivative(
    p: &ModelParams,
    t: f64,
    xi: &TensorGaussian,
    g: &Arc<Grid2D>,
    q: &QuadratureSpec,
    x_margin: f64,
) -> Result<CorrectedReport> {
    p.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need t > 0, got {t}")));
    }
    let sig = g.sigma();
    let (ns, nx) = (g.n_sigma(), g.n_x());
    let tau: Vec<f64> = sig.iter().map(|&s| variance_with(p.kappa, p.theta, t, s)).collect();
    let moved = Field::from_fn(g.clone(), |s, x| xi.sigma_part(flow_with(p.kappa, p.theta, t, s)).0 * xi.x_part(x));
    let moved_d = Field::from_fn(g.clone(), |s, x| xi.sigma_part(flow_with(p.kappa, p.theta, t, s)).1 * xi.x_part(x));
    let s_xi = heat_apply(&tau, &moved, q)?.field;
    let s_dxi = heat_apply(&tau, &moved_d, q)?.field;

    let dx = g.dx();
    let decay = (-p.kappa * t).exp();
    let i_theta = (0..ns)
        .min_by(|&a, &b| (sig[a] - p.theta).abs().total_cmp(&(sig[b] - p.theta).abs()))
        .unwrap_or(0);
    let (x_lo, x_hi) = (g.x_min() + x_margin, g.x_max() - x_margin);
    let (mut sum, mut theta_col) = (0.0, 0.0f64);
    for i in 1..ns - 1 {
        let (hm, hp) = (sig[i] - sig[i - 1], sig[i + 1] - sig[i]);
        let (cm, c0, cp) = (-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp)));
        let dd = variance_dsigma_with(p.kappa, p.theta, t, sig[i]);
        let w_s = 0.5 * (hm + hp);
        for j in 1..nx - 1 {
            let x = g.x()[j];
            if x < x_lo || x > x_hi {
                continue;
            }
            let lhs = cm * s_xi.get(i - 1, j) + c0 * s_xi.get(i, j) + cp * s_xi.get(i + 1, j);
            let (um, u0, up) = (s_xi.get(i, j - 1), s_xi.get(i, j), s_xi.get(i, j + 1));
            let b = (up - 2.0 * u0 + um) / (dx * dx) - (up - um) / (2.0 * dx);
            let rhs = decay * s_dxi.get(i, j) + dd * b;
            let e = lhs - rhs;
            sum += w_s * dx * e * e;
            if i == i_theta {
                theta_col = theta_col.max(e.abs());
            }
        }
    }
    Ok(CorrectedReport {
        n_sigma: ns,
        n_x: nx,
        residual: sum.sqrt(),
        theta_column_residual: theta_col,
        dsigma_variance_at_theta: variance_dsigma_with(p.kappa, p.theta, t, p.theta),
    })
}
