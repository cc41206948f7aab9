//! Closed-form coefficients of the zero-volvol semigroup: the mean-reversion
//! flow `δ_t`, the accumulated variance `𝔇`, its dual `𝔠` and the
//! discriminant `f` of `𝔇` viewed as a quadratic in σ.
//!
//! All variance-type quantities are written in terms of
//! `E(a) = (1 - e^{-a}) / a`, which keeps the κ → 0 limit free of the
//! cancellation present in the textbook form:
//!
//! ```text
//! 𝔇(t, σ) = θ² t / 2 + θ (σ - θ) t E(κt) + (σ - θ)² t E(2κt) / 2
//!         = ½ ∫₀ᵗ δ_s(σ)² ds
//! ```

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Below this |a| the function `E(a)` switches to its Taylor series.
const SERIES_CUTOFF: f64 = 1e-4;
/// Below this |κt| the discriminant switches to its Taylor series.
const DISCRIMINANT_CUTOFF: f64 = 0.1;

/// `(1 - e^{-a}) / a`, analytic at `a = 0`.
pub fn relative_decay(a: f64) -> f64 {
    if a.abs() < SERIES_CUTOFF {
        1.0 - a / 2.0 * (1.0 - a / 3.0 * (1.0 - a / 4.0 * (1.0 - a / 5.0)))
    } else {
        -(-a).exp_m1() / a
    }
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        Err(Error::NegativeTime(t))
    } else {
        Ok(())
    }
}

/// `δ_t(σ) = θ(1 - e^{-κt}) + σ e^{-κt}` for any real κ.
#[inline]
pub fn flow_with(kappa: f64, theta: f64, t: f64, sigma: f64) -> f64 {
    theta + (sigma - theta) * (-kappa * t).exp()
}

/// Accumulated variance `𝔇_κ(t, σ)` for any real κ; κ < 0 gives the dual
/// variance.
#[inline]
pub fn variance_with(kappa: f64, theta: f64, t: f64, sigma: f64) -> f64 {
    let d = sigma - theta;
    let a = kappa * t;
    0.5 * theta * theta * t + theta * d * t * relative_decay(a) + 0.5 * d * d * t * relative_decay(2.0 * a)
}

/// `∂𝔇_κ/∂σ (t, σ)`, differentiated analytically.
#[inline]
pub fn variance_dsigma_with(kappa: f64, theta: f64, t: f64, sigma: f64) -> f64 {
    let d = sigma - theta;
    let a = kappa * t;
    theta * t * relative_decay(a) + d * t * relative_decay(2.0 * a)
}

pub fn flow(p: &ModelParams, t: f64, sigma: f64) -> Result<f64> {
    check_time(t)?;
    Ok(flow_with(p.kappa, p.theta, t, sigma))
}

/// `𝔇(t, σ)`: zero at `t = 0`, positive afterwards.
pub fn variance(p: &ModelParams, t: f64, sigma: f64) -> Result<f64> {
    check_time(t)?;
    Ok(variance_with(p.kappa, p.theta, t, sigma))
}

/// `𝔠(t, σ)`: the variance with κ replaced by -κ. Satisfies
/// `𝔇(t, σ) = 𝔠(t, δ_t(σ))`.
pub fn variance_dual(p: &ModelParams, t: f64, sigma: f64) -> Result<f64> {
    check_time(t)?;
    Ok(variance_with(-p.kappa, p.theta, t, sigma))
}

pub fn variance_dsigma(p: &ModelParams, t: f64, sigma: f64) -> Result<f64> {
    check_time(t)?;
    Ok(variance_dsigma_with(p.kappa, p.theta, t, sigma))
}

/// `∂𝔇/∂t = δ_t(σ)² / 2`.
pub fn variance_dt(p: &ModelParams, t: f64, sigma: f64) -> Result<f64> {
    let d = flow(p, t, sigma)?;
    Ok(0.5 * d * d)
}

/// Discriminant of `σ ↦ 𝔇(t, σ)`:
/// `f(t) = θ²/(2κ²) [(2 + κt) e^{-2κt} - 4 e^{-κt} + 2 - κt]`.
pub fn discriminant(p: &ModelParams, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(discriminant_with(p.kappa, p.theta, t))
}

pub fn discriminant_with(kappa: f64, theta: f64, t: f64) -> f64 {
    let a = kappa * t;
    if a.abs() < DISCRIMINANT_CUTOFF {
        // f = θ² t² G(a) with G(a) = g(a) / (2a²)
        const C: [f64; 7] = [
            -1.0 / 12.0,
            1.0 / 12.0,
            -17.0 / 360.0,
            7.0 / 360.0,
            -43.0 / 6720.0,
            107.0 / 60480.0,
            -769.0 / 1_814_400.0,
        ];
        let g = C.iter().rev().fold(0.0, |acc, c| acc * a + c) * a * a;
        theta * theta * t * t * g
    } else {
        let e1 = (-a).exp();
        let bracket = (2.0 + a) * e1 * e1 - 4.0 * e1 + 2.0 - a;
        theta * theta / (2.0 * kappa * kappa) * bracket
    }
}

/// `lim_{t→0⁺} 𝔇(t, σ)/t = σ²/2`.
pub fn variance_rate_limit(_p: &ModelParams, sigma: f64) -> f64 {
    0.5 * sigma * sigma
}

/// Lattice density used by [`variance_floor`].
pub const FLOOR_SAMPLES: usize = 64;

/// `ε = min 𝔇(t, σ)/t` over `[α, β] × (0, horizon]`.
pub fn variance_floor(p: &ModelParams, horizon: f64) -> Result<f64> {
    variance_floor_sampled(p, horizon, FLOOR_SAMPLES)
}

/// [`variance_floor`] with an explicit lattice size (`n × n` samples),
/// followed by golden-section refinement around every lattice minimum.
pub fn variance_floor_sampled(p: &ModelParams, horizon: f64, n: usize) -> Result<f64> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be > 0, got {horizon}")));
    }
    if n < 3 {
        return Err(Error::InvalidArgument("need at least 3 samples per axis".into()));
    }
    let rate = |t: f64, s: f64| {
        if t == 0.0 {
            variance_rate_limit(p, s)
        } else {
            variance_with(p.kappa, p.theta, t, s) / t
        }
    };
    let sig = crate::model::linspace(p.alpha, p.beta, n);
    let ts = crate::model::linspace(0.0, horizon, n);
    let vals: Vec<Vec<f64>> = ts
        .iter()
        .map(|&t| sig.iter().map(|&s| rate(t, s)).collect())
        .collect();
    let mut best = f64::INFINITY;
    for (j, row) in vals.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            best = best.min(v);
            let is_local_min = (j.saturating_sub(1)..=(j + 1).min(n - 1)).all(|jj| {
                (i.saturating_sub(1)..=(i + 1).min(n - 1)).all(|ii| vals[jj][ii] >= v)
            });
            if !is_local_min {
                continue;
            }
            let s_lo = sig[i.saturating_sub(1)];
            let s_hi = sig[(i + 1).min(n - 1)];
            let t_lo = ts[j.saturating_sub(1)];
            let t_hi = ts[(j + 1).min(n - 1)];
            let (mut s, mut t) = (sig[i], ts[j]);
            for _ in 0..4 {
                s = golden_section(|x| rate(t, x), s_lo, s_hi);
                t = golden_section(|x| rate(x, s), t_lo, t_hi);
            }
            best = best.min(rate(t, s));
        }
    }
    Ok(best)
}

/// Minimiser of a unimodal function on `[a, b]`, endpoints included.
fn golden_section(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (hi - lo).abs() <= 1e-14 * (1.0 + lo.abs()) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    [a, b, mid]
        .into_iter()
        .min_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap_or(mid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ModelParams {
        ModelParams::new(1.0, 0.2, 0.0, 0.0, 0.1, 0.5, 0.0).unwrap()
    }

    /// Classical RK4 for δ' = κ(θ - δ).
    fn rk4_flow(kappa: f64, theta: f64, sigma: f64, t: f64, steps: usize) -> f64 {
        let f = |d: f64| kappa * (theta - d);
        let h = t / steps as f64;
        let mut y = sigma;
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f(y + 0.5 * h * k1);
            let k3 = f(y + 0.5 * h * k2);
            let k4 = f(y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    }

    /// Adaptive Simpson quadrature.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
        }
        #[allow(clippy::too_many_arguments)]
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            fa: f64,
            b: f64,
            fb: f64,
            whole: f64,
            m: f64,
            fm: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let (lm, flm, left) = simpson(f, a, fa, m, fm);
            let (rm, frm, right) = simpson(f, m, fm, b, fb);
            let delta = left + right - whole;
            if depth == 0 || delta.abs() <= 15.0 * tol {
                return left + right + delta / 15.0;
            }
            rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
        let (fa, fb) = (f(a), f(b));
        let (m, fm, whole) = simpson(f, a, fa, b, fb);
        rec(f, a, fa, b, fb, whole, m, fm, tol, 50)
    }

    #[test]
    fn flow_examples() {
        let p = p();
        assert_eq!(flow(&p, 0.0, 0.37).unwrap(), 0.37);
        assert!((flow(&p, 3.3, 0.2).unwrap() - 0.2).abs() < 1e-16);
        let oracle = rk4_flow(1.0, 0.2, 0.4, 2f64.ln(), 2000);
        assert!((oracle - 0.3).abs() < 1e-13);
        assert!((flow(&p, 2f64.ln(), 0.4).unwrap() - oracle).abs() < 1e-13);
        assert!(flow(&p, -1.0, 0.3).is_err());
    }

    #[test]
    fn flow_stays_in_strip() {
        let p = p();
        for k in 0..50 {
            let t = k as f64 * 0.1;
            for s in [p.alpha, 0.17, p.theta, 0.33, p.beta] {
                let d = flow(&p, t, s).unwrap();
                assert!(d >= s.min(p.theta) - 1e-15 && d <= s.max(p.theta) + 1e-15);
            }
        }
    }

    #[test]
    fn variance_examples() {
        let p = p();
        assert_eq!(variance(&p, 0.0, 0.4).unwrap(), 0.0);
        let t = 0.7;
        assert!((variance(&p, t, p.theta).unwrap() - p.theta * p.theta * t / 2.0).abs() < 1e-16);
        // frozen from the adaptive quadrature oracle below
        let oracle = adaptive_simpson(&|s| 0.5 * rk4_flow(1.0, 0.2, 0.4, s, 200).powi(2), 0.0, 1.0, 1e-14);
        assert!((oracle - 0.053_931_469_520_776_19).abs() < 1e-12);
        assert!((variance(&p, 1.0, 0.4).unwrap() - 0.053_931_469_520_776_19).abs() < 1e-15);
        assert!(variance(&p, -0.1, 0.4).is_err());
    }

    #[test]
    fn variance_matches_integral_of_squared_flow() {
        for kappa in [0.25, 1.0, 4.0] {
            let p = ModelParams::new(kappa, 0.2, 0.0, 0.0, 0.05, 0.6, 0.0).unwrap();
            for &t in &[0.01, 0.3, 1.0, 2.5] {
                for &s in &[0.05, 0.13, 0.2, 0.41, 0.6] {
                    let integral =
                        adaptive_simpson(&|u| 0.5 * flow_with(kappa, 0.2, u, s).powi(2), 0.0, t, 1e-14);
                    let v = variance(&p, t, s).unwrap();
                    assert!((v - integral).abs() <= 1e-10, "kappa={kappa} t={t} s={s}: {v} vs {integral}");
                }
            }
        }
    }

    #[test]
    fn dual_variance_relations() {
        let p = p();
        assert_eq!(variance_dual(&p, 0.0, 0.3).unwrap(), 0.0);
        for &(t, s) in &[(0.3, 0.1), (1.0, 0.4), (2.0, 0.25)] {
            let c = variance_dual(&p, t, s).unwrap();
            assert_eq!(c, variance_with(-p.kappa, p.theta, t, s));
            assert!(c >= 0.0);
        }
        let lhs = variance(&p, 1.0, 0.4).unwrap();
        let rhs = variance_dual(&p, 1.0, flow(&p, 1.0, 0.4).unwrap()).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn textbook_formula_agrees_away_from_zero() {
        for kappa in [0.25f64, 1.0, 4.0] {
            let th = 0.2f64;
            for &t in &[0.1, 1.0, 3.0] {
                for &s in &[0.05, 0.3, 0.6] {
                    let textbook = (th - s).powi(2) / (4.0 * kappa) * (1.0 - (-2.0 * kappa * t).exp())
                        - th * (th - s) / kappa * (1.0 - (-kappa * t).exp())
                        + 0.5 * th * th * t;
                    assert!((variance_with(kappa, th, t, s) - textbook).abs() < 1e-14);
                    let dual = (th - s).powi(2) / (4.0 * kappa) * ((2.0 * kappa * t).exp() - 1.0)
                        - th * (th - s) / kappa * ((kappa * t).exp() - 1.0)
                        + 0.5 * th * th * t;
                    assert!((variance_with(-kappa, th, t, s) - dual).abs() < 1e-12 * dual.max(1.0));
                }
            }
        }
    }

    #[test]
    fn small_kappa_limit() {
        let p = ModelParams::new(1e-12, 0.2, 0.0, 0.0, 0.05, 0.6, 0.0).unwrap();
        for &s in &[0.05, 0.3, 0.6] {
            for &t in &[0.1, 1.0, 5.0] {
                let v = variance(&p, t, s).unwrap();
                let limit = s * s * t / 2.0;
                assert!((v - limit).abs() <= 1e-8 * limit);
            }
        }
    }

    #[test]
    fn discriminant_examples() {
        let p = p();
        assert_eq!(discriminant(&p, 0.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let expected = 0.02 * (3.0 / (e * e) - 4.0 / e + 1.0);
        assert!((discriminant(&p, 1.0).unwrap() - expected).abs() < 1e-16);
        assert!((expected + 0.001_310_2).abs() < 1e-7);
        // series and closed form agree across the switch
        let a = DISCRIMINANT_CUTOFF;
        let lo = discriminant_with(1.0, 0.2, a * (1.0 - 1e-9));
        let hi = discriminant_with(1.0, 0.2, a * (1.0 + 1e-9));
        // f grows like t⁴, so a 1e-9 relative step in t moves it by ~4e-9
        assert!((lo - hi).abs() < 1e-8 * lo.abs());
        for k in 1..200 {
            let t = k as f64 * 0.02;
            assert!(discriminant(&p, t).unwrap() < 0.0);
        }
    }

    #[test]
    fn discriminant_is_that_of_the_quadratic() {
        // 𝔇(t, σ) = a σ² + b σ + c; compare b² - 4ac with f(t).
        let p = p();
        for &t in &[0.05, 0.5, 2.0] {
            let c = variance(&p, t, 0.0).unwrap();
            let q1 = variance(&p, t, 1.0).unwrap();
            let qm = variance(&p, t, -1.0).unwrap();
            let a = 0.5 * (q1 + qm) - c;
            let b = 0.5 * (q1 - qm);
            let disc = b * b - 4.0 * a * c;
            let f = discriminant(&p, t).unwrap();
            assert!((disc - f).abs() < 1e-13, "t={t}: {disc} vs {f}");
        }
    }

    #[test]
    fn rate_limit_examples() {
        let p = p();
        assert!((variance_rate_limit(&p, 0.2) - 0.02).abs() < 1e-16);
        assert_eq!(variance_rate_limit(&p, 0.0), 0.0);
        assert!((variance_rate_limit(&p, 0.4) - 0.08).abs() < 1e-16);
        let t = 1e-4;
        assert!((variance(&p, t, 0.4).unwrap() / t - 0.08).abs() <= 1e-4);
    }

    #[test]
    fn rate_limit_of_sigma_derivative() {
        // j = 1: ∂σ𝔇(t)/t → σ.
        let p = p();
        for &s in &[0.1, 0.3, 0.5] {
            let t = 1e-6;
            assert!((variance_dsigma(&p, t, s).unwrap() / t - s).abs() < 1e-5);
        }
    }

    #[test]
    fn dsigma_matches_finite_difference() {
        let p = p();
        for &(t, s) in &[(0.5, 0.3), (1.0, 0.12), (2.0, 0.45)] {
            let h = 1e-5;
            let fd = (variance(&p, t, s + h).unwrap() - variance(&p, t, s - h).unwrap()) / (2.0 * h);
            assert!((variance_dsigma(&p, t, s).unwrap() - fd).abs() < 1e-9);
        }
    }

    #[test]
    fn floor_examples() {
        let p = p();
        let eps = variance_floor(&p, 1.0).unwrap();
        assert!(eps > 0.0);
        for i in 0..64 {
            for j in 1..64 {
                let s = p.alpha + (p.beta - p.alpha) * i as f64 / 63.0;
                let t = j as f64 / 63.0;
                assert!(eps <= variance(&p, t, s).unwrap() / t + 1e-15);
            }
        }
        let doubled = variance_floor_sampled(&p, 1.0, 128).unwrap();
        assert!((eps - doubled).abs() < 1e-6);
        assert!(variance_floor(&p, 0.0).is_err());
    }
}
