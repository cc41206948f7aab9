//! Normal distribution helpers and Gauss–Hermite rules.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF via `erfc`, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Gauss–Hermite rule for the weight `e^{-z²}` on ℝ.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes and weights of order `n` by Newton iteration on the orthonormal
    /// Hermite recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.855_75 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        // ascending order
        nodes.reverse();
        weights.reverse();
        Self { nodes, weights }
    }

    /// `E[f(Z)]` for `Z ~ N(0, 1)`.
    pub fn expect_standard_normal(&self, f: impl Fn(f64) -> f64) -> f64 {
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(std::f64::consts::SQRT_2 * z))
            .sum();
        s / PI.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Double-precision rational approximation of Φ (Hart 1968, as
    /// popularised by West 2005).
    fn hart_cdf(x: f64) -> f64 {
        let xa = x.abs();
        let c = if xa > 37.0 {
            0.0
        } else {
            let e = (-xa * xa / 2.0).exp();
            if xa < 7.071_067_811_865_47 {
                let mut b = 3.526_249_659_989_11e-2 * xa + 0.700_383_064_443_688;
                b = b * xa + 6.373_962_203_531_65;
                b = b * xa + 33.912_866_078_383;
                b = b * xa + 112.079_291_497_871;
                b = b * xa + 221.213_596_169_931;
                b = b * xa + 220.206_867_912_376;
                let num = e * b;
                let mut d = 8.838_834_764_831_84e-2 * xa + 1.755_667_163_182_64;
                d = d * xa + 16.064_177_579_207;
                d = d * xa + 86.780_732_202_946_1;
                d = d * xa + 296.564_248_779_674;
                d = d * xa + 637.333_633_378_831;
                d = d * xa + 793.826_512_519_948;
                d = d * xa + 440.413_735_824_752;
                num / d
            } else {
                let mut b = xa + 0.65;
                b = xa + 4.0 / b;
                b = xa + 3.0 / b;
                b = xa + 2.0 / b;
                b = xa + 1.0 / b;
                e / b / 2.506_628_274_631
            }
        };
        if x > 0.0 {
            1.0 - c
        } else {
            c
        }
    }

    #[test]
    fn cdf_against_rational_oracle() {
        for k in 0..20 {
            let x = -9.5 + k as f64;
            let a = norm_cdf(x);
            let b = hart_cdf(x);
            assert!((a - b).abs() <= 1e-14 * b.max(1e-300) + 1e-16, "x={x}: {a} vs {b}");
        }
        assert!((norm_cdf(0.1) - norm_cdf(-0.1) - 0.079_655_674_554_057_96).abs() < 1e-15);
    }

    #[test]
    fn hermite_rule_integrates_moments() {
        for n in [8, 64, 128] {
            let gh = GaussHermite::new(n);
            assert!((gh.expect_standard_normal(|_| 1.0) - 1.0).abs() < 1e-13);
            assert!(gh.expect_standard_normal(|z| z).abs() < 1e-13);
            assert!((gh.expect_standard_normal(|z| z * z) - 1.0).abs() < 1e-12);
            assert!((gh.expect_standard_normal(|z| z.powi(4)) - 3.0).abs() < 1e-11);
            // E[e^{Z}] = e^{1/2}; needs enough nodes to resolve the growth
            if n >= 64 {
                assert!((gh.expect_standard_normal(f64::exp) - 0.5f64.exp()).abs() < 1e-12);
            }
            assert!(gh.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
