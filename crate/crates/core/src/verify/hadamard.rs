use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Forward-mode dual number `v + d ε`, `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn var(v: f64) -> Self {
        Self { v, d: 1.0 }
    }

    pub fn constant(v: f64) -> Self {
        Self { v, d: 0.0 }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Self { v: e, d: e * self.d }
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        Self {
            v: self.v.powi(n),
            d: n as f64 * self.v.powi(n - 1) * self.d,
        }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, c: f64) -> Dual {
        Dual { v: self.v * c, d: self.d * c }
    }
}

/// Analytic σ-profile for derivative identities.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaProfileFn {
    /// Coefficients in ascending powers of σ.
    Polynomial(Vec<f64>),
    /// `exp(-(σ - center)² / (2 width²))`.
    Gaussian { center: f64, width: f64 },
}

impl SigmaProfileFn {
    pub fn eval(&self, s: Dual) -> Dual {
        match self {
            SigmaProfileFn::Polynomial(c) => c
                .iter()
                .enumerate()
                .fold(Dual::constant(0.0), |acc, (k, ck)| acc + s.powi(k as i32) * *ck),
            SigmaProfileFn::Gaussian { center, width } => {
                let z = (s - Dual::constant(*center)) * (1.0 / width);
                (z * z * -0.5).exp()
            }
        }
    }
}

/// `δ_t(σ) = θ + (σ - θ) e^{-κt}` on dual numbers.
fn flow_dual(p: &ModelParams, t: f64, s: Dual) -> Dual {
    Dual::constant(p.theta) + (s - Dual::constant(p.theta)) * (-p.kappa * t).exp()
}

/// Largest `|e^{tA}(∂σh) - e^{κt} ∂σ(e^{tA}h)|` over `sigma`, with both
/// derivatives taken exactly by dual numbers.
pub fn check_hadamard(p: &ModelParams, t: f64, h: &SigmaProfileFn, sigma: &[f64]) -> Result<f64> {
    p.validate()?;
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let growth = (p.kappa * t).exp();
    let mut worst = 0.0f64;
    for &s in sigma {
        let moved = flow_dual(p, t, Dual::constant(s)).v;
        let lhs = h.eval(Dual::var(moved)).d;
        let rhs = growth * h.eval(flow_dual(p, t, Dual::var(s))).d;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}
