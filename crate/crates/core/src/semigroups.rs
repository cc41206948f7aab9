//! Exact actions of the zero-volvol building blocks:
//!
//! * `e^{τB}` with `B = ∂ₓ² - ∂ₓ`: Gaussian convolution with variance `2τ`
//!   and drift `-τ`, where `τ` may depend on σ;
//! * `e^{tA}` with `A = κ(θ - σ)∂σ`: composition with the flow `δ_t`;
//! * `S(t) = e^{𝔇(t)B} e^{tA} = e^{tA} e^{𝔠(t)B}`, the semigroup of
//!   `L₀ = A + σ²/2 B`.

use serde::{Deserialize, Serialize};

use crate::coeffs::{flow_with, variance_with};
use crate::error::{Error, Result};
use crate::interp::{stencil, uniform_stencil, Interp};
use crate::model::{Field, ModelParams};
use crate::special::{norm_cdf, GaussHermite};

/// Relative truncation level above which heat actions are flagged.
pub const TRUNCATION_FLAG_LEVEL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuadratureRule {
    GaussHermite { order: usize },
    /// `points` equispaced nodes on `[-width, width]` standard deviations.
    Trapezoid { points: usize, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    /// Off-grid access to sampled data in both x (heat) and σ (transport).
    pub interp: Interp,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::Trapezoid {
                points: 801,
                width: 8.0,
            },
            interp: Interp::Linear,
        }
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(order: usize) -> Self {
        Self {
            rule: QuadratureRule::GaussHermite { order },
            interp: Interp::Linear,
        }
    }

    pub fn trapezoid(points: usize, width: f64) -> Self {
        Self {
            rule: QuadratureRule::Trapezoid { points, width },
            interp: Interp::Linear,
        }
    }

    pub fn with_interp(mut self, interp: Interp) -> Self {
        self.interp = interp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.rule {
            QuadratureRule::GaussHermite { order } if order < 8 => Err(Error::InvalidArgument(format!(
                "Gauss-Hermite order must be >= 8, got {order}"
            ))),
            QuadratureRule::Trapezoid { points, .. } if points < 51 || points % 2 == 0 => Err(
                Error::InvalidArgument(format!("trapezoid points must be odd and >= 51, got {points}")),
            ),
            QuadratureRule::Trapezoid { width, .. } if !(width >= 4.0) => Err(Error::InvalidArgument(
                format!("trapezoid width must be >= 4 standard deviations, got {width}"),
            )),
            _ => Ok(()),
        }
    }

    /// Standard-normal nodes and weights (`Σ wₖ f(zₖ) ≈ E f(Z)`) and the
    /// probability mass the rule ignores.
    fn standard_rule(&self) -> (Vec<f64>, Vec<f64>, f64) {
        match self.rule {
            QuadratureRule::GaussHermite { order } => {
                let gh = GaussHermite::new(order);
                let s = std::f64::consts::PI.sqrt();
                let z = gh.nodes.iter().map(|x| std::f64::consts::SQRT_2 * x).collect();
                let w = gh.weights.iter().map(|w| w / s).collect();
                (z, w, 0.0)
            }
            QuadratureRule::Trapezoid { points, width } => {
                let dz = 2.0 * width / (points - 1) as f64;
                let z: Vec<f64> = (0..points).map(|k| -width + k as f64 * dz).collect();
                let w = z
                    .iter()
                    .enumerate()
                    .map(|(k, &zk)| {
                        let end = if k == 0 || k == points - 1 { 0.5 } else { 1.0 };
                        end * dz * crate::special::norm_pdf(zk)
                    })
                    .collect();
                (z, w, 2.0 * norm_cdf(-width))
            }
        }
    }
}

/// Result of a heat-type action together with its truncation diagnostics.
#[derive(Debug, Clone)]
pub struct HeatOutput {
    pub field: Field,
    /// Estimated absolute error from truncating the Gaussian window.
    pub truncation_estimate: f64,
    /// Set when the estimate exceeds `1e-10 · max|h|`.
    pub flagged: bool,
}

/// `e^{τ(σ)B} h`: row `i` is convolved with the Gaussian of variance
/// `2 tau[i]` and drift `-tau[i]`.
pub fn heat_apply(tau: &[f64], h: &Field, q: &QuadratureSpec) -> Result<HeatOutput> {
    q.validate()?;
    let g = h.grid().clone();
    if tau.len() != g.n_sigma() {
        return Err(Error::GridMismatch(format!(
            "{} variances for {} sigma rows",
            tau.len(),
            g.n_sigma()
        )));
    }
    if let Some(bad) = tau.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("heat time must be >= 0, got {bad}")));
    }
    let (z, w, tail) = q.standard_rule();
    let nx = g.n_x();
    let (x0, dx) = (g.x_min(), g.dx());
    let xs = g.x().to_vec();
    let interp = q.interp;
    let mut out = vec![0.0; g.len()];
    crate::par::for_each_row(&mut out, nx, |i, row_out| {
        let src = h.row(i);
        let t = tau[i];
        if t == 0.0 {
            row_out.copy_from_slice(src);
            return;
        }
        let sd = (2.0 * t).sqrt();
        for (j, o) in row_out.iter_mut().enumerate() {
            let centre = xs[j] - t;
            let mut acc = 0.0;
            for (zk, wk) in z.iter().zip(&w) {
                let y = centre + sd * zk;
                acc += wk * uniform_stencil(x0, dx, nx, y, interp).apply(src);
            }
            *o = acc;
        }
    });
    let hmax = h.max_abs();
    let truncation_estimate = tail * hmax;
    Ok(HeatOutput {
        field: Field::from_parts(g, out),
        truncation_estimate,
        flagged: truncation_estimate > TRUNCATION_FLAG_LEVEL * hmax,
    })
}

/// Heat action of `B` on the call payoff `(e^x - K)⁺`:
/// `e^x Φ(d₊) - K Φ(d₋)`, `d± = (x - ln K ± τ)/√(2τ)`.
pub fn heat_call_closed_form(tau: f64, x: f64, strike: f64) -> f64 {
    if tau <= 0.0 {
        return (x.exp() - strike).max(0.0);
    }
    let sd = (2.0 * tau).sqrt();
    let m = x - strike.ln();
    let d_plus = (m + tau) / sd;
    let d_minus = (m - tau) / sd;
    x.exp() * norm_cdf(d_plus) - strike * norm_cdf(d_minus)
}

/// `e^{tA} h`: row at σ takes the values of `h` at `δ_t(σ)`.
pub fn transport_apply(p: &ModelParams, t: f64, h: &Field) -> Result<Field> {
    transport_apply_with(p, t, h, Interp::Linear)
}

pub fn transport_apply_with(p: &ModelParams, t: f64, h: &Field, interp: Interp) -> Result<Field> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(h.clone());
    }
    let g = h.grid().clone();
    let sig = g.sigma();
    let nx = g.n_x();
    let mut out = vec![0.0; g.len()];
    for (i, &s) in sig.iter().enumerate() {
        let st = stencil(sig, flow_with(p.kappa, p.theta, t, s), interp);
        let dst = &mut out[i * nx..(i + 1) * nx];
        for k in 0..st.len {
            let wk = st.weights[k];
            for (d, v) in dst.iter_mut().zip(h.row(st.start + k)) {
                *d += wk * v;
            }
        }
    }
    Ok(Field::from_parts(g, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ordering {
    /// `e^{𝔇(t)B} e^{tA} h`.
    HeatAfterTransport,
    /// `e^{tA} e^{𝔠(t)B} h`.
    TransportAfterHeat,
}

/// `S(t) h` in either of its two factorisations.
pub fn composite_apply(
    p: &ModelParams,
    t: f64,
    h: &Field,
    q: &QuadratureSpec,
    ordering: Ordering,
) -> Result<HeatOutput> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    q.validate()?;
    if t == 0.0 {
        return Ok(HeatOutput {
            field: h.clone(),
            truncation_estimate: 0.0,
            flagged: false,
        });
    }
    let sig = h.grid().sigma();
    match ordering {
        Ordering::HeatAfterTransport => {
            let moved = transport_apply_with(p, t, h, q.interp)?;
            let tau: Vec<f64> = sig.iter().map(|&s| variance_with(p.kappa, p.theta, t, s)).collect();
            heat_apply(&tau, &moved, q)
        }
        Ordering::TransportAfterHeat => {
            let tau: Vec<f64> = sig.iter().map(|&s| variance_with(-p.kappa, p.theta, t, s)).collect();
            let heated = heat_apply(&tau, h, q)?;
            Ok(HeatOutput {
                field: transport_apply_with(p, t, &heated.field, q.interp)?,
                ..heated
            })
        }
    }
}

/// Applies `e^{g(σ)B}` with a σ-dependent heat time given per node.
pub fn heat_apply_profile(g: impl Fn(f64) -> f64, h: &Field, q: &QuadratureSpec) -> Result<HeatOutput> {
    let tau: Vec<f64> = h.grid().sigma().iter().map(|&s| g(s)).collect();
    heat_apply(&tau, h, q)
}

/// Pricing kernel `(4π𝔇)^{-1/2} exp(-(x - y - 𝔇)²/(4𝔇))`, `𝔇 = 𝔇(t, σ)`.
pub fn kernel_density(p: &ModelParams, t: f64, sigma: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kernel is a point mass at t = {t}; need t > 0"
        )));
    }
    let d = variance_with(p.kappa, p.theta, t, sigma);
    let r = x - y - d;
    Ok((-r * r / (4.0 * d)).exp() / (4.0 * std::f64::consts::PI * d).sqrt())
}

/// Zero-volvol call price `S(t) (e^x - K)⁺` at `(σ, x)`.
pub fn price_zero_volvol(p: &ModelParams, t: f64, strike: f64, sigma: f64, x: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    if !(strike > 0.0) {
        return Err(Error::InvalidArgument(format!("strike must be > 0, got {strike}")));
    }
    if t == 0.0 {
        return Ok((x.exp() - strike).max(0.0));
    }
    Ok(heat_call_closed_form(variance_with(p.kappa, p.theta, t, sigma), x, strike))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{payoff_sample, weighted_l2_norm, Grid2D, Payoff, WeightSpec};
    use std::sync::Arc;

    fn p() -> ModelParams {
        ModelParams::new(1.0, 0.2, 0.0, 0.0, 0.05, 0.6, 0.0).unwrap()
    }

    #[test]
    fn closed_form_call_against_gauss_hermite() {
        // oracle: the payoff equals the smooth function e^{y} - K above the
        // kink, so E[(e^Y - K)⁺] = E[e^Y - K] - ∫_{z < z₀} (e^{y(z)} - K) φ(z) dz.
        // The first term uses a 128-point Gauss-Hermite rule, the second
        // composite Simpson on a finite interval.
        let (tau, x, k) = (0.02f64, 0.0, 1.0f64);
        let sd = (2.0 * tau).sqrt();
        let z0 = (k.ln() - x + tau) / sd;
        let gh = GaussHermite::new(128);
        let full = gh.expect_standard_normal(|z| (x - tau + sd * z).exp() - k);
        let below = {
            let f = |z: f64| ((x - tau + sd * z).exp() - k) * crate::special::norm_pdf(z);
            let (a, b, n) = (z0 - 12.0, z0, 20_000);
            let h = (b - a) / n as f64;
            let mut s = f(a) + f(b);
            for i in 1..n {
                s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let oracle = full - below;
        let cf = heat_call_closed_form(tau, x, k);
        assert!((cf - oracle).abs() < 1e-9, "{cf} vs {oracle}");
        assert!((cf - 0.079_655_67).abs() < 1e-8);
    }

    #[test]
    fn closed_form_limits() {
        assert!((heat_call_closed_form(1e-14, 2f64.ln(), 1.0) - 1.0).abs() < 1e-6);
        assert!(heat_call_closed_form(0.05, -40.0, 1.0) < 1e-15);
        for &x in &[-1.0, 0.0, 0.3, 2.0] {
            assert!(heat_call_closed_form(0.1, x, 1.0) >= (x.exp() - 1.0f64).max(0.0) - 1e-15);
        }
    }

    #[test]
    fn heat_preserves_constants_and_rejects_negative_time() {
        let g = Arc::new(Grid2D::uniform(&p(), 4, -6.0, 6.0, 121).unwrap());
        let one = payoff_sample(&Payoff::constant(1.0), &g).unwrap();
        let out = heat_apply(&[0.0, 0.01, 0.1, 0.5], &one, &QuadratureSpec::default()).unwrap();
        assert!(out.field.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        assert!(!out.flagged);
        assert!(heat_apply(&[0.0, -0.1, 0.1, 0.1], &one, &QuadratureSpec::default()).is_err());
        let narrow = QuadratureSpec::trapezoid(101, 4.0);
        assert!(heat_apply(&[0.1; 4], &one, &narrow).unwrap().flagged);
    }

    #[test]
    fn heat_maps_nonnegative_to_nonnegative_and_keeps_mass() {
        let g = Arc::new(Grid2D::uniform(&p(), 3, -10.0, 10.0, 801).unwrap());
        let h = Field::from_fn(g.clone(), |_, x| (-(x * x) / 0.5).exp());
        let out = heat_apply(&[0.05, 0.2, 0.7], &h, &QuadratureSpec::default()).unwrap();
        assert!(out.field.min() >= 0.0);
        let mass = |row: &[f64]| row.iter().sum::<f64>() * g.dx();
        for i in 0..3 {
            assert!((mass(out.field.row(i)) - mass(h.row(i))).abs() < 1e-4 * mass(h.row(i)));
        }
    }

    #[test]
    fn transport_basics() {
        let g = Arc::new(Grid2D::uniform(&p(), 23, -1.0, 1.0, 5).unwrap());
        let flat = Field::from_fn(g.clone(), |_, x| x * x);
        assert_eq!(transport_apply(&p(), 0.7, &flat).unwrap().values(), flat.values());
        let h = Field::from_fn(g.clone(), |s, x| s * (1.0 + x));
        assert_eq!(transport_apply(&p(), 0.0, &h).unwrap(), h);
        // affine in σ: exact under linear interpolation
        let moved = transport_apply(&p(), 0.4, &h).unwrap();
        for (i, &s) in g.sigma().iter().enumerate() {
            let d = flow_with(1.0, 0.2, 0.4, s);
            assert!((moved.get(i, 3) - d * (1.0 + g.x()[3])).abs() < 1e-14);
        }
    }

    #[test]
    fn transport_norm_bound() {
        let p = p();
        let g = Arc::new(Grid2D::uniform(&p, 401, -1.0, 1.0, 5).unwrap());
        let h = Field::from_fn(g.clone(), |s, _| (-(s - 0.45f64).powi(2) / 0.002).exp());
        let w = WeightSpec::unweighted();
        for &t in &[0.1, 0.5, 1.0, 2.0] {
            let r = weighted_l2_norm(&transport_apply(&p, t, &h).unwrap(), &w) / weighted_l2_norm(&h, &w);
            assert!(r <= (p.kappa * t / 2.0).exp() * (1.0 + 1e-3), "t={t}: {r}");
        }
    }

    #[test]
    fn composite_identity_at_zero_and_sigma_independent_call() {
        let p = p();
        let g = Arc::new(Grid2D::for_call(&p, 1.0, 5, 1601).unwrap());
        let h = payoff_sample(&Payoff::call(1.0).unwrap(), &g).unwrap();
        let q = QuadratureSpec::default();
        let id = composite_apply(&p, 0.0, &h, &q, Ordering::TransportAfterHeat).unwrap();
        assert_eq!(id.field, h);
        let out = composite_apply(&p, 1.0, &h, &q, Ordering::HeatAfterTransport).unwrap();
        let j = g.x().iter().position(|&x| x.abs() < 1e-12).unwrap();
        for (i, &s) in g.sigma().iter().enumerate() {
            let expected = heat_call_closed_form(variance_with(1.0, 0.2, 1.0, s), 0.0, 1.0);
            assert!((out.field.get(i, j) - expected).abs() < 2e-4, "{} vs {expected}", out.field.get(i, j));
        }
    }

    #[test]
    fn kernel_properties() {
        let p = p();
        assert!(kernel_density(&p, 0.0, 0.3, 0.0, 0.0).is_err());
        let d = variance_with(1.0, 0.2, 1.0, 0.4);
        let k00 = kernel_density(&p, 1.0, 0.4, 0.0, 0.0).unwrap();
        assert!((k00 - 1.1985).abs() < 1e-3);
        // normalisation by composite Simpson on ±12 standard deviations
        let sd = (2.0 * d).sqrt();
        let (a, b, n) = (-d - 12.0 * sd, -d + 12.0 * sd, 4000);
        let h = (b - a) / n as f64;
        let f = |y: f64| kernel_density(&p, 1.0, 0.4, 0.0, y).unwrap();
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-10);
        let mode = kernel_density(&p, 1.0, 0.4, 0.0, -d).unwrap();
        for dy in [-1e-3, 1e-3] {
            assert!(kernel_density(&p, 1.0, 0.4, 0.0, -d + dy).unwrap() < mode);
        }
    }

    #[test]
    fn zero_volvol_price() {
        let p = p();
        assert_eq!(price_zero_volvol(&p, 0.0, 1.0, 0.4, 0.3).unwrap(), 0.3f64.exp() - 1.0);
        let a = price_zero_volvol(&p, 1.0, 1.0, 0.4, 0.0).unwrap();
        assert_eq!(a, heat_call_closed_form(variance_with(1.0, 0.2, 1.0, 0.4), 0.0, 1.0));
        let mut prev = 0.0;
        for k in 0..40 {
            let t = k as f64 * 0.05;
            let v = price_zero_volvol(&p, t, 1.0, 0.3, 0.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }
}
