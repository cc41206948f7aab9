//! Empirical energy constants of a discrete generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FDOperator;
use crate::model::{trapezoid_weights, Field, WeightSpec};

/// Added to the quasi-dissipativity constant before fitting `c1`, so that a
/// positive `c1` reflects coercivity rather than a vanishing margin.
pub const GARDING_SHIFT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GardingReport {
    pub trials: usize,
    pub seed: u64,
    /// `max (Mu, u)_λ / ‖u‖²_λ` over the trials.
    pub max_ratio: f64,
    /// `c2 = max(max_ratio, 0) + GARDING_SHIFT`.
    pub c2: f64,
    /// Largest `c1` with `(Mu, u) ≤ -c1 |u|²_{H¹} + c2 ‖u‖²` on every trial.
    pub c1: f64,
}

impl GardingReport {
    pub fn quasi_dissipative(&self) -> bool {
        self.c2.is_finite()
    }
}

struct Energy {
    form: f64,
    h1: f64,
    l2: f64,
}

fn energies(op: &FDOperator, u: &Field, w: &WeightSpec) -> Energy {
    let g = op.grid();
    let mu = op.apply(u).expect("field built on the operator grid");
    let ws = trapezoid_weights(g.sigma());
    let wx = trapezoid_weights(g.x());
    let sig = g.sigma();
    let dx = g.dx();
    let weight: Vec<f64> = g.x().iter().map(|&x| w.weight(x).powi(-2)).collect();
    let (ns, nx) = (g.n_sigma(), g.n_x());
    let (mut form, mut h1, mut l2) = (0.0, 0.0, 0.0);
    for i in 0..ns {
        for j in 0..nx {
            let m = ws[i] * wx[j] * weight[j];
            let v = u.get(i, j);
            form += m * mu.get(i, j) * v;
            l2 += m * v * v;
            if i + 1 < ns {
                let h = sig[i + 1] - sig[i];
                let d = (u.get(i + 1, j) - v) / h;
                h1 += h * wx[j] * weight[j] * d * d;
            }
            if j + 1 < nx {
                let d = (u.get(i, j + 1) - v) / dx;
                let wm = 0.5 * (weight[j] + weight[j + 1]);
                h1 += dx * ws[i] * wm * d * d;
            }
        }
    }
    Energy { form, h1, l2 }
}

/// Random field over the unknown nodes; the trial index cycles through
/// white noise, smooth modes, and fields rough in only one direction.
fn trial_field(op: &FDOperator, rng: &mut ChaCha8Rng, k: usize) -> Field {
    let g = op.grid().clone();
    let (ns, nx) = (g.n_sigma(), g.n_x());
    let (s0, s1) = (g.sigma()[0], g.sigma()[ns - 1]);
    let (x0, x1) = (g.x_min(), g.x_max());
    let mut modes = |count: usize, fmax: f64| -> Vec<(f64, f64, f64)> {
        (0..count)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..fmax), rng.gen_range(0.0..6.3)))
            .collect()
    };
    let smooth = |m: &[(f64, f64, f64)], t: f64| -> f64 {
        m.iter().map(|(a, f, ph)| a * (f * std::f64::consts::PI * t + ph).sin()).sum()
    };
    let kind = k % 4;
    let ms = modes(4, 6.0);
    let mx = modes(4, 6.0);
    let mut f = Field::zeros(g.clone());
    for i in 0..ns {
        let ts = (g.sigma()[i] - s0) / (s1 - s0);
        for j in 0..nx {
            let tx = (g.x()[j] - x0) / (x1 - x0);
            let v = match kind {
                0 => rng.gen_range(-1.0..1.0),
                1 => smooth(&ms, ts) * smooth(&mx, tx),
                2 => rng.gen_range(-1.0..1.0) * smooth(&mx, tx),
                _ => smooth(&ms, ts) * rng.gen_range(-1.0..1.0),
            };
            f.set(i, j, v);
        }
    }
    op.restrict(&f).expect("same grid")
}

/// Fits `(Mu, u)_λ ≤ -c1 |u|²_{H¹} + c2 ‖u‖²_λ` over `trials` seeded random
/// fields, with weight `e^{-2λ⟨x⟩}` taken from the operator's parameters.
pub fn garding_check(op: &FDOperator, trials: usize, seed: u64) -> GardingReport {
    let w = WeightSpec::from(&op.params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(trials);
    for k in 0..trials {
        let u = trial_field(op, &mut rng, k);
        let e = energies(op, &u, &w);
        if e.l2 > 0.0 {
            samples.push(e);
        }
    }
    let max_ratio = samples
        .iter()
        .map(|e| e.form / e.l2)
        .fold(f64::NEG_INFINITY, f64::max);
    let c2 = max_ratio.max(0.0) + GARDING_SHIFT;
    let c1 = samples
        .iter()
        .filter(|e| e.h1 > 0.0)
        .map(|e| (c2 * e.l2 - e.form) / e.h1)
        .fold(f64::INFINITY, f64::min);
    GardingReport {
        trials,
        seed,
        max_ratio,
        c2,
        c1,
    }
}
