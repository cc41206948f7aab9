//! Domain types shared by every other module: model parameters, the
//! tensor-product `(σ, x)` grid, sampled fields, payoffs and the exponential
//! weight `e^{λ⟨x⟩}`.
//!
//! Weighted norms use the convention that a function `f` belongs to the
//! weighted space when `e^{-λ⟨x⟩} f` is square integrable, so `λ > 0` admits
//! exponentially growing data such as call payoffs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the λSABR generator on the volatility strip `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mean-reversion speed κ > 0.
    pub kappa: f64,
    /// Long-run volatility level θ.
    pub theta: f64,
    /// Volatility of volatility ν ≥ 0.
    pub nu: f64,
    /// Correlation ρ, |ρ| < 1.
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Weight exponent λ ≥ 0.
    pub lambda: f64,
}

impl ModelParams {
    pub fn new(
        kappa: f64,
        theta: f64,
        nu: f64,
        rho: f64,
        alpha: f64,
        beta: f64,
        lambda: f64,
    ) -> Result<Self> {
        let p = Self {
            kappa,
            theta,
            nu,
            rho,
            alpha,
            beta,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    /// Configuration used by the ν error-scaling study.
    pub fn study_default() -> Self {
        Self {
            kappa: 1.0,
            theta: 0.2,
            nu: 0.0,
            rho: 0.3,
            alpha: 0.05,
            beta: 0.6,
            lambda: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.kappa,
            self.theta,
            self.nu,
            self.rho,
            self.alpha,
            self.beta,
            self.lambda,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParams(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if !(0.0 < self.alpha && self.alpha < self.theta && self.theta < self.beta) {
            return Err(Error::InvalidParams(format!(
                "need 0 < alpha < theta < beta, got alpha={}, theta={}, beta={}",
                self.alpha, self.theta, self.beta
            )));
        }
        if self.nu < 0.0 {
            return Err(Error::InvalidParams(format!("nu must be >= 0, got {}", self.nu)));
        }
        if self.rho.abs() >= 1.0 {
            return Err(Error::InvalidParams(format!("|rho| must be < 1, got {}", self.rho)));
        }
        if self.lambda < 0.0 {
            return Err(Error::InvalidParams(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

/// Tensor-product grid: `sigma` spans `[alpha, beta]`, `x` is uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    sigma: Vec<f64>,
    x: Vec<f64>,
}

impl Grid2D {
    pub fn new(sigma: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if sigma.len() < 3 || x.len() < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes per axis, got {}x{}",
                sigma.len(),
                x.len()
            )));
        }
        if sigma.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite node".into()));
        }
        if sigma.windows(2).any(|w| w[1] <= w[0]) || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing".into()));
        }
        let dx = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
        for (j, xj) in x.iter().enumerate() {
            let expected = x[0] + j as f64 * dx;
            if (xj - expected).abs() > 1e-12 * dx.max(xj.abs()) {
                return Err(Error::InvalidGrid("x nodes must be uniformly spaced".into()));
            }
        }
        Ok(Self { sigma, x })
    }

    /// Uniform grid with `n_sigma` nodes on `[alpha, beta]` and `n_x` nodes on
    /// `[x_min, x_max]`.
    pub fn uniform(p: &ModelParams, n_sigma: usize, x_min: f64, x_max: f64, n_x: usize) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::InvalidGrid(format!("x_max ({x_max}) must exceed x_min ({x_min})")));
        }
        Self::new(linspace(p.alpha, p.beta, n_sigma), linspace(x_min, x_max, n_x))
    }

    /// Grid centred on `ln K` with half-width 8, wide enough for the Gaussian
    /// tails of every variance used by the pricing routines.
    pub fn for_call(p: &ModelParams, strike: f64, n_sigma: usize, n_x: usize) -> Result<Self> {
        if !(strike > 0.0) {
            return Err(Error::InvalidArgument(format!("strike must be > 0, got {strike}")));
        }
        let c = strike.ln();
        Self::uniform(p, n_sigma, c - 8.0, c + 8.0, n_x)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn n_sigma(&self) -> usize {
        self.sigma.len()
    }

    pub fn n_x(&self) -> usize {
        self.x.len()
    }

    pub fn len(&self) -> usize {
        self.sigma.len() * self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        (self.x[self.x.len() - 1] - self.x[0]) / (self.x.len() - 1) as f64
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn sigma_is_uniform(&self) -> bool {
        let n = self.sigma.len();
        let h = (self.sigma[n - 1] - self.sigma[0]) / (n - 1) as f64;
        self.sigma
            .iter()
            .enumerate()
            .all(|(i, s)| (s - (self.sigma[0] + i as f64 * h)).abs() <= 1e-12 * h.max(s.abs()))
    }

    /// Checks that the σ nodes span exactly `[alpha, beta]`.
    pub fn check_spans(&self, p: &ModelParams) -> Result<()> {
        let lo = self.sigma[0];
        let hi = self.sigma[self.sigma.len() - 1];
        let tol = 1e-12 * p.beta.abs().max(1.0);
        if (lo - p.alpha).abs() > tol || (hi - p.beta).abs() > tol {
            return Err(Error::InvalidGrid(format!(
                "sigma nodes span [{lo}, {hi}] but the strip is [{}, {}]",
                p.alpha, p.beta
            )));
        }
        Ok(())
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + i as f64 * h })
        .collect()
}

/// Trapezoid weights for possibly non-uniform nodes.
pub fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for k in 0..n - 1 {
        let h = nodes[k + 1] - nodes[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    w
}

/// Values sampled on a grid, stored row-major over σ then x.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid2D>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid2D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.n_sigma(),
                grid.n_x()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("field values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid2D>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &s in grid.sigma() {
            for &x in grid.x() {
                values.push(f(s, x));
            }
        }
        Self { grid, values }
    }

    /// Internal constructor that skips the finiteness scan.
    pub(crate) fn from_parts(grid: Arc<Grid2D>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i_sigma: usize, j_x: usize) -> f64 {
        self.values[i_sigma * self.grid.n_x() + j_x]
    }

    pub fn set(&mut self, i_sigma: usize, j_x: usize, v: f64) {
        let nx = self.grid.n_x();
        self.values[i_sigma * nx + j_x] = v;
    }

    pub fn row(&self, i_sigma: usize) -> &[f64] {
        let nx = self.grid.n_x();
        &self.values[i_sigma * nx..(i_sigma + 1) * nx]
    }

    pub fn row_mut(&mut self, i_sigma: usize) -> &mut [f64] {
        let nx = self.grid.n_x();
        &mut self.values[i_sigma * nx..(i_sigma + 1) * nx]
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Field::from_parts(self.grid.clone(), values))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Field::from_parts(self.grid.clone(), values))
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_parts(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `⟨x⟩ = sqrt(1 + x²)`.
pub fn japanese_bracket(x: f64) -> f64 {
    x.hypot(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub lambda: f64,
}

impl WeightSpec {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn unweighted() -> Self {
        Self { lambda: 0.0 }
    }

    /// `e^{λ⟨x⟩}`.
    pub fn weight(&self, x: f64) -> f64 {
        (self.lambda * japanese_bracket(x)).exp()
    }
}

impl From<&ModelParams> for WeightSpec {
    fn from(p: &ModelParams) -> Self {
        Self { lambda: p.lambda }
    }
}

/// Trapezoid approximation of `‖e^{-λ⟨x⟩} f‖_{L²(I×[x_min,x_max])}`.
pub fn weighted_l2_norm(f: &Field, w: &WeightSpec) -> f64 {
    let g = f.grid();
    let ws = trapezoid_weights(g.sigma());
    let wx: Vec<f64> = trapezoid_weights(g.x())
        .into_iter()
        .zip(g.x())
        .map(|(q, &x)| q * (-2.0 * w.lambda * japanese_bracket(x)).exp())
        .collect();
    let mut acc = 0.0;
    for (i, qs) in ws.iter().enumerate() {
        let row = f.row(i);
        let s: f64 = row.iter().zip(&wx).map(|(v, q)| q * v * v).sum();
        acc += qs * s;
    }
    acc.sqrt()
}

/// Weighted norm of `a - b`; rejects fields on different grids.
pub fn weighted_l2_distance(a: &Field, b: &Field, w: &WeightSpec) -> Result<f64> {
    Ok(weighted_l2_norm(&a.sub(b)?, w))
}

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffKind {
    /// `max(e^x - K, 0)`.
    Call { strike: f64 },
    /// `exp(-(x - center)² / (2 width²))`.
    GaussianBump { center: f64, width: f64 },
    ExpX,
    Constant(f64),
    Tabulated(Field),
}

/// Multiplicative σ-factor of a payoff.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaProfile {
    Constant,
    /// One sample per σ node.
    Samples(Vec<f64>),
}

impl SigmaProfile {
    /// Compactly supported `C³` bump `(1 - r²)⁴`, `r = (σ - center)/radius`,
    /// sampled on the σ nodes of `grid`.
    pub fn bump(grid: &Grid2D, center: f64, radius: f64) -> Self {
        SigmaProfile::Samples(grid.sigma().iter().map(|&s| sigma_bump(s, center, radius)).collect())
    }
}

pub fn sigma_bump(sigma: f64, center: f64, radius: f64) -> f64 {
    let r = (sigma - center) / radius;
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - r * r).powi(4)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Payoff {
    pub kind: PayoffKind,
    pub sigma_profile: SigmaProfile,
}

impl Payoff {
    pub fn new(kind: PayoffKind, sigma_profile: SigmaProfile) -> Result<Self> {
        match &kind {
            PayoffKind::Call { strike } if !(*strike > 0.0) => {
                return Err(Error::InvalidArgument(format!("call strike must be > 0, got {strike}")))
            }
            PayoffKind::GaussianBump { width, .. } if !(*width > 0.0) => {
                return Err(Error::InvalidArgument(format!("gaussian width must be > 0, got {width}")))
            }
            _ => {}
        }
        Ok(Self { kind, sigma_profile })
    }

    pub fn call(strike: f64) -> Result<Self> {
        Self::new(PayoffKind::Call { strike }, SigmaProfile::Constant)
    }

    pub fn constant(c: f64) -> Self {
        Self {
            kind: PayoffKind::Constant(c),
            sigma_profile: SigmaProfile::Constant,
        }
    }

    /// Value of the x-part at `x` (σ-factor excluded).
    fn x_value(&self, x: f64) -> Option<f64> {
        match &self.kind {
            PayoffKind::Call { strike } => Some((x.exp() - strike).max(0.0)),
            PayoffKind::GaussianBump { center, width } => {
                let z = (x - center) / width;
                Some((-0.5 * z * z).exp())
            }
            PayoffKind::ExpX => Some(x.exp()),
            PayoffKind::Constant(c) => Some(*c),
            PayoffKind::Tabulated(_) => None,
        }
    }
}

/// Pointwise evaluation of a payoff on the grid.
pub fn payoff_sample(p: &Payoff, g: &Arc<Grid2D>) -> Result<Field> {
    let sigma_factor: Vec<f64> = match &p.sigma_profile {
        SigmaProfile::Constant => vec![1.0; g.n_sigma()],
        SigmaProfile::Samples(s) => {
            if s.len() != g.n_sigma() {
                return Err(Error::GridMismatch(format!(
                    "sigma profile has {} samples for {} sigma nodes",
                    s.len(),
                    g.n_sigma()
                )));
            }
            s.clone()
        }
    };
    let field = match &p.kind {
        PayoffKind::Tabulated(t) => {
            if !t.same_grid(&Field::zeros(g.clone())) {
                return Err(Error::GridMismatch("tabulated payoff lives on another grid".into()));
            }
            let mut out = Field::from_parts(g.clone(), t.values().to_vec());
            for (i, f) in sigma_factor.iter().enumerate() {
                out.row_mut(i).iter_mut().for_each(|v| *v *= f);
            }
            out
        }
        _ => {
            let xs: Vec<f64> = g.x().iter().map(|&x| p.x_value(x).unwrap_or(0.0)).collect();
            let mut values = Vec::with_capacity(g.len());
            for f in &sigma_factor {
                values.extend(xs.iter().map(|v| f * v));
            }
            Field::from_parts(g.clone(), values)
        }
    };
    if field.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("payoff overflowed on this grid".into()));
    }
    Ok(field)
}
