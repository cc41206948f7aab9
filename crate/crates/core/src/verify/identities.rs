use std::sync::Arc;

use super::{Check, SuiteReport};
use crate::coeffs::{discriminant_with, flow_with, variance_with};
use crate::error::Result;
use crate::interp::Interp;
use crate::model::{linspace, weighted_l2_norm, Field, Grid2D, ModelParams, WeightSpec};
use crate::semigroups::{
    composite_apply, heat_apply, heat_apply_profile, heat_call_closed_form, transport_apply_with, Ordering,
    QuadratureSpec,
};
use crate::special::{norm_pdf, GaussHermite};

/// Residual bound for the closed-form scalar identities.
pub const SCALAR_TOL: f64 = 1e-12;
/// Relative bound for the small-κ limit.
pub const SMALL_KAPPA_TOL: f64 = 1e-8;
/// Bound for the closed-form call against quadrature.
pub const CALL_TOL: f64 = 1e-9;
/// Relative slack on the transport growth bound `e^{κt/2}`.
pub const TRANSPORT_SLACK: f64 = 1e-3;

const LATTICE: usize = 32;
const LATTICE_KAPPAS: [f64; 3] = [0.25, 1.0, 4.0];

fn kappas(p: &ModelParams) -> Vec<f64> {
    let mut k = LATTICE_KAPPAS.to_vec();
    if !k.contains(&p.kappa) {
        k.push(p.kappa);
    }
    k
}

/// Scalar identities of `δ`, `𝔇`, `𝔠` and `f` on a `32³` lattice of
/// `(t, s, σ)` with `t, s ∈ (0, 2]` and `σ ∈ [α, β]`, for `κ ∈ {¼, 1, 4}`
/// and the model's own `κ`.
pub fn scalar_identity_checks(p: &ModelParams) -> Vec<Check> {
    let ts: Vec<f64> = (1..=LATTICE).map(|k| 2.0 * k as f64 / LATTICE as f64).collect();
    let sig = linspace(p.alpha, p.beta, LATTICE);
    let th = p.theta;
    let (mut semigroup, mut cocycle, mut dual, mut at_zero) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut nonpositive, mut min_var) = (0usize, f64::INFINITY);
    let (mut nonnegative_disc, mut max_disc) = (0usize, f64::NEG_INFINITY);
    let mut small = 0.0f64;
    for &k in &kappas(p) {
        for &t in &ts {
            let f = discriminant_with(k, th, t);
            max_disc = max_disc.max(f);
            if f >= 0.0 {
                nonnegative_disc += 1;
            }
            for &s in &sig {
                let d_t = variance_with(k, th, t, s);
                min_var = min_var.min(d_t);
                if d_t <= 0.0 {
                    nonpositive += 1;
                }
                at_zero = at_zero.max(variance_with(k, th, 0.0, s).abs());
                let moved = flow_with(k, th, t, s);
                dual = dual.max((d_t - variance_with(-k, th, t, moved)).abs());
                for &u in &ts {
                    semigroup = semigroup.max((flow_with(k, th, u, moved) - flow_with(k, th, t + u, s)).abs());
                    let lhs = d_t + variance_with(k, th, u, moved);
                    cocycle = cocycle.max((lhs - variance_with(k, th, t + u, s)).abs());
                }
            }
        }
    }
    for &t in &ts {
        for &s in &sig {
            let limit = 0.5 * s * s * t;
            small = small.max((variance_with(1e-12, th, t, s) - limit).abs() / limit);
        }
    }
    vec![
        Check::new("flow_semigroup", semigroup, SCALAR_TOL),
        Check::new("variance_cocycle", cocycle, SCALAR_TOL),
        Check::new("variance_dual_relation", dual, SCALAR_TOL),
        Check::new("variance_at_zero", at_zero, SCALAR_TOL),
        Check::new("variance_positive", nonpositive as f64, 0.0).with_note(format!("min {min_var:.3e}")),
        Check::new("discriminant_negative", nonnegative_disc as f64, 0.0).with_note(format!("max {max_disc:.3e}")),
        Check::new("small_kappa_limit", small, SMALL_KAPPA_TOL),
    ]
}

/// `S(τ)(e^x - K)⁺` by quadrature: `E[e^Y - K]` with a 128-point
/// Gauss–Hermite rule, minus the part below the kink by composite Simpson.
pub fn call_quadrature_oracle(tau: f64, x: f64, strike: f64) -> f64 {
    let sd = (2.0 * tau).sqrt();
    let z0 = (strike.ln() - x + tau) / sd;
    let gh = GaussHermite::new(128);
    let full = gh.expect_standard_normal(|z| (x - tau + sd * z).exp() - strike);
    let f = |z: f64| ((x - tau + sd * z).exp() - strike) * norm_pdf(z);
    let (a, b, n) = (z0 - 12.0, z0, 20_000);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    full - s * h / 3.0
}

/// Smooth test datum: Gaussian in x (centre 0, width 0.5) times a Gaussian
/// in σ centred mid-strip with width an eighth of the strip.
pub fn identity_test_field(g: &Arc<Grid2D>) -> Field {
    let s = g.sigma();
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let c = 0.5 * (lo + hi);
    let w = (hi - lo) / 8.0;
    Field::from_fn(g.clone(), |sv, x| {
        let a = (sv - c) / w;
        let b = x / 0.5;
        (-0.5 * (a * a + b * b)).exp()
    })
}

/// Largest `‖e^{tA}h‖ / (e^{κt/2} ‖h‖)` over σ-Gaussians of several centres
/// and widths and `t ∈ {0.1, 0.5, 1, 2}`.
pub fn transport_bound_ratio(p: &ModelParams, g: &Arc<Grid2D>, interp: Interp) -> Result<f64> {
    let w = WeightSpec::from(p);
    let span = p.beta - p.alpha;
    let mut worst = 0.0f64;
    for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for width in [0.04, 0.1, 0.2] {
            let c = p.alpha + frac * span;
            let sw = width * span;
            let h = Field::from_fn(g.clone(), |s, x| {
                let a = (s - c) / sw;
                (-0.5 * a * a - x * x).exp()
            });
            let n0 = weighted_l2_norm(&h, &w);
            for t in [0.1, 0.5, 1.0, 2.0] {
                let moved = transport_apply_with(p, t, &h, interp)?;
                let r = weighted_l2_norm(&moved, &w) / n0 / (0.5 * p.kappa * t).exp();
                worst = worst.max(r);
            }
        }
    }
    Ok(worst)
}

/// Nodes at least `margin` away from both x ends.
fn interior_max(f: &Field, margin: f64, err: impl Fn(f64, f64) -> f64) -> f64 {
    let g = f.grid();
    let (lo, hi) = (g.x_min() + margin, g.x_max() - margin);
    let mut m = 0.0f64;
    for i in 0..g.n_sigma() {
        for (j, &x) in g.x().iter().enumerate() {
            if x >= lo && x <= hi {
                m = m.max(err(x, f.get(i, j)));
            }
        }
    }
    m
}

/// Scalar identities at `1e-12` plus field identities at `tol` (relative to
/// `‖h‖` in the model's weighted norm).
pub fn run_identity_suite(p: &ModelParams, g: &Arc<Grid2D>, q: &QuadratureSpec, tol: f64) -> Result<SuiteReport> {
    p.validate()?;
    q.validate()?;
    let mut checks = scalar_identity_checks(p);
    let w = WeightSpec::from(p);

    // heat action on its two stationary data
    let tau = 0.25f64;
    let margin = tau + 8.0 * (2.0 * tau).sqrt();
    let taus = vec![tau; g.n_sigma()];
    let one = heat_apply(&taus, &Field::from_fn(g.clone(), |_, _| 1.0), q)?.field;
    checks.push(Check::new("heat_constant", interior_max(&one, margin, |_, v| (v - 1.0).abs()), tol));
    let ex = heat_apply(&taus, &Field::from_fn(g.clone(), |_, x| x.exp()), q)?.field;
    checks.push(Check::new(
        "heat_exponential",
        interior_max(&ex, margin, |x, v| (v / x.exp() - 1.0).abs()),
        tol,
    ));
    let cf = heat_call_closed_form(0.02, 0.0, 1.0);
    checks.push(Check::new("heat_call_closed_form", (cf - call_quadrature_oracle(0.02, 0.0, 1.0)).abs(), CALL_TOL));

    let h = identity_test_field(g);
    let hn = weighted_l2_norm(&h, &w);
    let rel = |a: &Field, b: &Field| -> Result<f64> { Ok(weighted_l2_norm(&a.sub(b)?, &w) / hn) };

    for t in [0.25, 1.0] {
        let a = composite_apply(p, t, &h, q, Ordering::HeatAfterTransport)?.field;
        let b = composite_apply(p, t, &h, q, Ordering::TransportAfterHeat)?.field;
        checks.push(Check::new(format!("ordering_t{t}"), rel(&a, &b)?, tol));
    }

    let half = composite_apply(p, 0.5, &h, q, Ordering::HeatAfterTransport)?.field;
    let twice = composite_apply(p, 0.5, &half, q, Ordering::HeatAfterTransport)?.field;
    let once = composite_apply(p, 1.0, &h, q, Ordering::HeatAfterTransport)?.field;
    checks.push(Check::new("semigroup_law", rel(&twice, &once)?, tol));

    // e^{tA} e^{gB} = e^{(g∘δ_t)B} e^{tA} with g(σ) = σ²/4
    let t = 1.0;
    let gfun = |s: f64| 0.25 * s * s;
    let lhs = transport_apply_with(p, t, &heat_apply_profile(gfun, &h, q)?.field, q.interp)?;
    let moved = transport_apply_with(p, t, &h, q.interp)?;
    let rhs = heat_apply_profile(|s| gfun(flow_with(p.kappa, p.theta, t, s)), &moved, q)?.field;
    checks.push(Check::new("cross_commutation", rel(&lhs, &rhs)?, tol));

    let ratio = transport_bound_ratio(p, g, q.interp)?;
    checks.push(
        Check::new("transport_norm_bound", (ratio - 1.0).max(0.0), TRANSPORT_SLACK)
            .with_note(format!("max ratio / e^(kappa t/2) = {ratio:.6}")),
    );

    Ok(SuiteReport::new("identities", p, Some(g), None, checks))
}
