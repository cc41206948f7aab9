//! Finite differences for the λSABR generators on `[α, β] × [x_min, x_max]`.
//!
//! Unknowns are ordered σ-major over the interior x nodes. Zero Dirichlet
//! data is imposed on the x ends. On the σ ends it depends on the operator:
//! when there is no σ-diffusion (`A`, `B`, `L₀`, and `L` at `ν = 0`) the
//! drift `κ(θ - σ)` points into the strip, the σ ends are outflow
//! boundaries, and their rows stay unknowns with a one-sided difference.
//! With σ-diffusion (`L` at `ν > 0`, `L₁`, `L₂`) the σ ends carry zero data.

mod banded;
mod expm;
mod garding;
mod sparse;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use banded::BandedLu;
pub use expm::{expm, expm_oracle, EXPM_MAX_UNKNOWNS};
pub use garding::{garding_check, GardingReport};
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::model::{Field, Grid2D, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    L,
    L0,
    A,
    B,
    L1,
    L2,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Generator::L => "L",
            Generator::L0 => "L0",
            Generator::A => "A",
            Generator::B => "B",
            Generator::L1 => "L1",
            Generator::L2 => "L2",
        };
        f.write_str(s)
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L" => Ok(Generator::L),
            "L0" => Ok(Generator::L0),
            "A" => Ok(Generator::A),
            "B" => Ok(Generator::B),
            "L1" => Ok(Generator::L1),
            "L2" => Ok(Generator::L2),
            other => Err(Error::Parse(format!("unknown generator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssembleOptions {
    /// Reject `L` at `ν = 0`, whose diffusion matrix is singular.
    pub validate_ellipticity: bool,
}

/// Discrete generator over the unknown nodes of a grid.
#[derive(Debug, Clone)]
pub struct FDOperator {
    pub generator: Generator,
    pub params: ModelParams,
    grid: Arc<Grid2D>,
    sigma_lo: usize,
    sigma_hi: usize,
    matrix: CsrMatrix,
}

impl FDOperator {
    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Inclusive range of σ rows that are unknowns.
    pub fn sigma_rows(&self) -> (usize, usize) {
        (self.sigma_lo, self.sigma_hi)
    }

    pub fn n_unknowns(&self) -> usize {
        self.matrix.n()
    }

    fn nxi(&self) -> usize {
        self.grid.n_x() - 2
    }

    /// Index of node `(i, j)` among the unknowns.
    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.sigma_lo || i > self.sigma_hi || j == 0 || j + 1 >= self.grid.n_x() {
            return None;
        }
        Some((i - self.sigma_lo) * self.nxi() + (j - 1))
    }

    /// Unknown values of a field.
    pub fn pack(&self, u: &Field) -> Result<Vec<f64>> {
        if u.grid().as_ref() != self.grid.as_ref() {
            return Err(Error::GridMismatch("field and operator grids differ".into()));
        }
        let nx = self.grid.n_x();
        let mut out = Vec::with_capacity(self.n_unknowns());
        for i in self.sigma_lo..=self.sigma_hi {
            out.extend_from_slice(&u.row(i)[1..nx - 1]);
        }
        Ok(out)
    }

    /// Field with the given unknowns and zero boundary values.
    pub fn unpack(&self, v: &[f64]) -> Field {
        let mut f = Field::zeros(self.grid.clone());
        let nxi = self.nxi();
        for (r, i) in (self.sigma_lo..=self.sigma_hi).enumerate() {
            f.row_mut(i)[1..=nxi].copy_from_slice(&v[r * nxi..(r + 1) * nxi]);
        }
        f
    }

    /// Boundary nodes replaced by zero.
    pub fn restrict(&self, u: &Field) -> Result<Field> {
        Ok(self.unpack(&self.pack(u)?))
    }

    /// Discrete operator applied to a field; boundary values of `u` are
    /// treated as zero and the result vanishes on boundary nodes.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        Ok(self.unpack(&self.matrix.mul_vec(&self.pack(u)?)))
    }
}

fn has_sigma_diffusion(p: &ModelParams, which: Generator) -> bool {
    match which {
        Generator::L => p.nu != 0.0,
        Generator::L1 | Generator::L2 => true,
        Generator::L0 | Generator::A | Generator::B => false,
    }
}

pub fn assemble(p: &ModelParams, g: &Arc<Grid2D>, which: Generator) -> Result<FDOperator> {
    assemble_with(p, g, which, AssembleOptions::default())
}

pub fn assemble_with(
    p: &ModelParams,
    g: &Arc<Grid2D>,
    which: Generator,
    opts: AssembleOptions,
) -> Result<FDOperator> {
    p.validate()?;
    g.check_spans(p)?;
    if opts.validate_ellipticity && which == Generator::L && p.nu == 0.0 {
        return Err(Error::Degenerate(
            "L with nu = 0 is not elliptic; assemble L0 instead".into(),
        ));
    }
    // cell Péclet number of the x-part ∂ₓ² - ∂ₓ
    if g.dx() >= 2.0 {
        return Err(Error::InvalidGrid(format!(
            "dx = {} gives a cell Peclet number >= 1 for the x-drift",
            g.dx()
        )));
    }

    let ns = g.n_sigma();
    let nx = g.n_x();
    let (sigma_lo, sigma_hi) = if has_sigma_diffusion(p, which) {
        (1, ns - 2)
    } else {
        (0, ns - 1)
    };
    let nxi = nx - 2;
    let n = (sigma_hi - sigma_lo + 1) * nxi;

    let (c_a, c_b, c_l1, c_l2) = match which {
        Generator::L => (1.0, 1.0, p.nu, p.nu * p.nu),
        Generator::L0 => (1.0, 1.0, 0.0, 0.0),
        Generator::A => (1.0, 0.0, 0.0, 0.0),
        Generator::B => (0.0, 1.0, 0.0, 0.0),
        Generator::L1 => (0.0, 0.0, 1.0, 0.0),
        Generator::L2 => (0.0, 0.0, 0.0, 1.0),
    };
    // plain B carries no σ²/2 factor
    let b_scale = |s: f64| if which == Generator::B { 1.0 } else { 0.5 * s * s };

    let sig = g.sigma();
    let dx = g.dx();
    let dx_first = [-0.5 / dx, 0.0, 0.5 / dx];
    let dx_second = [1.0 / (dx * dx), -2.0 / (dx * dx), 1.0 / (dx * dx)];

    let col = |i: usize, j: usize| -> Option<usize> {
        if i < sigma_lo || i > sigma_hi || j == 0 || j + 1 >= nx {
            None
        } else {
            Some((i - sigma_lo) * nxi + (j - 1))
        }
    };

    let mut rows = Vec::with_capacity(n);
    for i in sigma_lo..=sigma_hi {
        let s = sig[i];
        // σ first and second difference weights at offsets -1, 0, +1
        let (ds1, ds2) = if i == 0 {
            let h = sig[1] - sig[0];
            ([0.0, -1.0 / h, 1.0 / h], [0.0; 3])
        } else if i == ns - 1 {
            let h = sig[i] - sig[i - 1];
            ([-1.0 / h, 1.0 / h, 0.0], [0.0; 3])
        } else {
            let hm = s - sig[i - 1];
            let hp = sig[i + 1] - s;
            (
                [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))],
                [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))],
            )
        };
        let drift = c_a * p.kappa * (p.theta - s);
        let bx = c_b * b_scale(s);
        let cross = c_l1 * p.rho * s * s;
        let diff = c_l2 * 0.5 * s * s;
        for j in 1..nx - 1 {
            let mut row = Vec::with_capacity(9);
            let mut push = |di: isize, dj: isize, v: f64| {
                if v == 0.0 {
                    return;
                }
                let ii = i as isize + di;
                let jj = j as isize + dj;
                if ii < 0 || jj < 0 {
                    return;
                }
                if let Some(c) = col(ii as usize, jj as usize) {
                    row.push((c, v));
                }
            };
            for k in 0..3 {
                let o = k as isize - 1;
                push(o, 0, drift * ds1[k] + diff * ds2[k]);
                push(0, o, bx * (dx_second[k] - dx_first[k]));
            }
            if cross != 0.0 {
                for a in 0..3 {
                    for b in [0, 2] {
                        push(a as isize - 1, b as isize - 1, cross * ds1[a] * dx_first[b]);
                    }
                }
            }
            rows.push(row);
        }
    }
    Ok(FDOperator {
        generator: which,
        params: p.clone(),
        grid: g.clone(),
        sigma_lo,
        sigma_hi,
        matrix: CsrMatrix::from_rows(n, rows),
    })
}

/// θ-weighted time stepping: `0` explicit, `½` Crank–Nicolson, `1` implicit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaScheme {
    pub theta_weight: f64,
    pub dt: f64,
}

/// Relative residual accepted from each linear solve.
pub const SOLVE_TOLERANCE: f64 = 1e-12;

impl ThetaScheme {
    pub fn new(theta_weight: f64, dt: f64) -> Result<Self> {
        let s = Self { theta_weight, dt };
        s.validate()?;
        Ok(s)
    }

    pub fn crank_nicolson(dt: f64) -> Result<Self> {
        Self::new(0.5, dt)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta_weight) {
            return Err(Error::InvalidArgument(format!(
                "theta weight must lie in [0, 1], got {}",
                self.theta_weight
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }

    /// Rejects `dt` above the explicit bound `2 / ((1 - 2θ) R)`, with `R` the
    /// Gershgorin radius of the operator.
    pub fn check_stability(&self, op: &FDOperator) -> Result<()> {
        self.validate()?;
        if self.theta_weight >= 0.5 {
            return Ok(());
        }
        let radius = op.matrix.max_abs_row_sum();
        let bound = 2.0 / ((1.0 - 2.0 * self.theta_weight) * radius);
        if self.dt > bound {
            return Err(Error::Unstable(format!(
                "dt = {} exceeds the explicit stability bound {bound:.3e}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Factorised θ-scheme for repeated stepping with one operator.
#[derive(Debug, Clone)]
pub struct Stepper {
    op: FDOperator,
    scheme: ThetaScheme,
    lhs: CsrMatrix,
    rhs: CsrMatrix,
    lu: Option<BandedLu>,
}

impl Stepper {
    pub fn new(op: &FDOperator, scheme: ThetaScheme) -> Result<Self> {
        scheme.check_stability(op)?;
        let tw = scheme.theta_weight;
        let lhs = op.matrix.shifted(1.0, -tw * scheme.dt);
        let rhs = op.matrix.shifted(1.0, (1.0 - tw) * scheme.dt);
        let lu = if tw > 0.0 { Some(BandedLu::factor(&lhs)?) } else { None };
        Ok(Self {
            op: op.clone(),
            scheme,
            lhs,
            rhs,
            lu,
        })
    }

    pub fn scheme(&self) -> ThetaScheme {
        self.scheme
    }

    /// Advances unknown values in place.
    pub fn advance_vec(&self, v: &mut Vec<f64>, n_steps: usize) -> Result<()> {
        let mut b = vec![0.0; v.len()];
        for step in 1..=n_steps {
            self.rhs.matvec(v, &mut b);
            match &self.lu {
                None => std::mem::swap(v, &mut b),
                Some(lu) => {
                    v.copy_from_slice(&b);
                    lu.solve_in_place(v);
                    self.refine(lu, &b, v)?;
                }
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { step });
            }
        }
        Ok(())
    }

    fn refine(&self, lu: &BandedLu, b: &[f64], x: &mut [f64]) -> Result<()> {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut r = self.lhs.mul_vec(x);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        for attempt in 0..3 {
            let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
            if res <= SOLVE_TOLERANCE {
                return Ok(());
            }
            if !res.is_finite() || attempt == 2 {
                return Err(Error::LinearSolve(format!("relative residual {res:.3e}")));
            }
            lu.solve_in_place(&mut r);
            for (xi, d) in x.iter_mut().zip(&r) {
                *xi += d;
            }
            r = self.lhs.mul_vec(x);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
        }
        Ok(())
    }

    pub fn advance(&self, u: &Field, n_steps: usize) -> Result<Field> {
        let mut v = self.op.pack(u)?;
        self.advance_vec(&mut v, n_steps)?;
        Ok(self.op.unpack(&v))
    }
}

/// `n_steps` θ-scheme steps of `∂ₜu = op·u` from `u`.
pub fn step(op: &FDOperator, scheme: ThetaScheme, u: &Field, n_steps: usize) -> Result<Field> {
    Stepper::new(op, scheme)?.advance(u, n_steps)
}

/// Number of steps of size close to `dt_max` covering `[0, t]` exactly, and
/// the resulting step size.
pub fn steps_for(t: f64, dt_max: f64) -> (usize, f64) {
    if t <= 0.0 {
        return (0, dt_max);
    }
    let n = (t / dt_max - 1e-9).ceil().max(1.0) as usize;
    (n, t / n as f64)
}
