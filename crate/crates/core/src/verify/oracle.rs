use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{Check, SuiteReport};
use crate::error::Result;
use crate::fdsolver::{assemble, expm_oracle, garding_check, steps_for, Generator, Stepper, ThetaScheme};
use crate::model::{weighted_l2_norm, Field, Grid2D, ModelParams, WeightSpec};
use crate::semigroups::{composite_apply, Ordering, QuadratureSpec};

/// Pairwise bound for the three computations of `e^{tL₀}h`, relative to `‖h‖`.
pub const TRIPLE_TOL: f64 = 5e-4;
/// Required error reduction under one grid refinement.
pub const MIN_SHRINK: f64 = 3.5;

/// Three-way comparison of the zero-volvol semigroup on a pair of grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSetup {
    pub params: ModelParams,
    pub t: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// `(n_sigma, n_x, dt)` of the coarse and the main grid.
    pub coarse: (usize, usize, f64),
    pub main: (usize, usize, f64),
    pub sigma_center: f64,
    pub sigma_width: f64,
    pub x_width: f64,
}

impl Default for OracleSetup {
    /// Main grid of 30 × 60 cells on `x ∈ [-5, 5]` and a coarse grid at twice
    /// the spacing, `t = 0.5`. The datum is a broad Gaussian (σ: centre 0.3,
    /// width 0.3; x: width 1) so that both grids resolve it.
    fn default() -> Self {
        Self {
            params: ModelParams::study_default(),
            t: 0.5,
            x_min: -5.0,
            x_max: 5.0,
            coarse: (16, 31, 0.02),
            main: (31, 61, 0.01),
            sigma_center: 0.3,
            sigma_width: 0.3,
            x_width: 1.0,
        }
    }
}

impl OracleSetup {
    pub fn grid(&self, n_sigma: usize, n_x: usize) -> Result<Arc<Grid2D>> {
        Ok(Arc::new(Grid2D::uniform(&self.params, n_sigma, self.x_min, self.x_max, n_x)?))
    }

    pub fn datum(&self, g: &Arc<Grid2D>) -> Field {
        Field::from_fn(g.clone(), |s, x| {
            let a = (s - self.sigma_center) / self.sigma_width;
            let b = x / self.x_width;
            (-0.5 * (a * a + b * b)).exp()
        })
    }
}

/// Pairwise distances, each divided by `‖h‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleOracle {
    pub composite_vs_expm: f64,
    pub composite_vs_cn: f64,
    pub expm_vs_cn: f64,
}

impl TripleOracle {
    pub fn max(&self) -> f64 {
        self.composite_vs_expm.max(self.composite_vs_cn).max(self.expm_vs_cn)
    }
}

/// Closed-form `S(t)h`, the dense exponential of the discrete `L₀`, and
/// Crank–Nicolson stepping of it, compared pairwise in the weighted norm.
pub fn triple_oracle(p: &ModelParams, h: &Field, t: f64, dt: f64, q: &QuadratureSpec) -> Result<TripleOracle> {
    let g = h.grid().clone();
    let w = WeightSpec::from(p);
    let op = assemble(p, &g, Generator::L0)?;
    let h0 = op.restrict(h)?;
    let hn = weighted_l2_norm(&h0, &w);

    let closed = op.restrict(&composite_apply(p, t, &h0, q, Ordering::HeatAfterTransport)?.field)?;
    let e = expm_oracle(&op, t)?;
    let dense = op.unpack((e * DVector::from_vec(op.pack(&h0)?)).as_slice());
    let (n, dt) = steps_for(t, dt);
    let cn = Stepper::new(&op, ThetaScheme::crank_nicolson(dt)?)?.advance(&h0, n)?;

    let d = |a: &Field, b: &Field| -> Result<f64> { Ok(weighted_l2_norm(&a.sub(b)?, &w) / hn) };
    Ok(TripleOracle {
        composite_vs_expm: d(&closed, &dense)?,
        composite_vs_cn: d(&closed, &cn)?,
        expm_vs_cn: d(&dense, &cn)?,
    })
}

/// Triple comparison on the main grid with its refinement ratios.
pub fn run_oracle_suite(setup: &OracleSetup, q: &QuadratureSpec) -> Result<SuiteReport> {
    let p = &setup.params;
    let run = |(ns, nx, dt): (usize, usize, f64)| -> Result<(Arc<Grid2D>, TripleOracle)> {
        let g = setup.grid(ns, nx)?;
        let r = triple_oracle(p, &setup.datum(&g), setup.t, dt, q)?;
        Ok((g, r))
    };
    let (_, coarse) = run(setup.coarse)?;
    let (g, main) = run(setup.main)?;
    let mut checks = vec![];
    for (id, c, m) in [
        ("composite_vs_expm", coarse.composite_vs_expm, main.composite_vs_expm),
        ("composite_vs_cn", coarse.composite_vs_cn, main.composite_vs_cn),
        ("expm_vs_cn", coarse.expm_vs_cn, main.expm_vs_cn),
    ] {
        checks.push(Check::new(id, m, TRIPLE_TOL));
        let ratio = c / m;
        checks.push(Check::lower(format!("{id}_shrink"), ratio, MIN_SHRINK));
    }
    Ok(SuiteReport::new("oracle", p, Some(&g), None, checks))
}

/// Quasi-dissipativity of `B` and `A` and the Garding constants of `L` at
/// the model's volvol.
pub fn run_garding_suite(p: &ModelParams, g: &Arc<Grid2D>, trials: usize, seed: u64) -> Result<SuiteReport> {
    let flat = p.clone().with_lambda(0.0);
    let b = garding_check(&assemble(&flat, g, Generator::B)?, trials, seed);
    let a = garding_check(&assemble(&flat, g, Generator::A)?, trials, seed);
    let l_op = assemble(p, g, Generator::L)?;
    let l = garding_check(&l_op, trials, seed);
    let again = garding_check(&l_op, trials, seed);
    let checks = vec![
        Check::new("b_dissipative", b.max_ratio.max(0.0), 1e-10).with_note(format!("max ratio {:.3e}", b.max_ratio)),
        Check::new("a_growth", a.max_ratio, 0.5 * p.kappa * 1.05)
            .with_note(format!("kappa/2 = {}", 0.5 * p.kappa)),
        Check::lower("l_c1_positive", l.c1, 0.0).with_note(format!("c2 = {:.4}", l.c2)),
        Check::new("l_c2_finite", if l.c2.is_finite() { 0.0 } else { f64::INFINITY }, 0.0)
            .with_note(format!("c2 = {:.4}", l.c2)),
        Check::new("deterministic", if l == again { 0.0 } else { 1.0 }, 0.0),
    ];
    Ok(SuiteReport::new("garding", p, Some(g), Some(seed), checks))
}
