//! One-dimensional interpolation on grid lines.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Interp {
    /// Piecewise linear: bounded and monotone, second order.
    #[default]
    Linear,
    /// Four-point Lagrange, fourth order on smooth data.
    Cubic,
}

/// Stencil of at most four nodes with their weights.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub start: usize,
    pub len: usize,
    pub weights: [f64; 4],
}

impl Stencil {
    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.len {
            acc += self.weights[k] * values[self.start + k];
        }
        acc
    }
}

/// Stencil for `y` on uniformly spaced nodes `x0 + j h`, `j < n`; values
/// outside the nodes are clamped to the nearest boundary value.
#[inline]
pub fn uniform_stencil(x0: f64, h: f64, n: usize, y: f64, interp: Interp) -> Stencil {
    let u = (y - x0) / h;
    if u <= 0.0 {
        return point(0);
    }
    if u >= (n - 1) as f64 {
        return point(n - 1);
    }
    let j = (u.floor() as usize).min(n - 2);
    let s = u - j as f64;
    match interp {
        Interp::Linear => linear(j, s),
        Interp::Cubic => {
            if n < 4 {
                return linear(j, s);
            }
            let start = j.saturating_sub(1).min(n - 4);
            // offsets of y relative to the stencil nodes, in units of h
            let r = u - start as f64;
            let mut w = [0.0; 4];
            for (k, wk) in w.iter_mut().enumerate() {
                let mut l = 1.0;
                for m in 0..4 {
                    if m != k {
                        l *= (r - m as f64) / (k as f64 - m as f64);
                    }
                }
                *wk = l;
            }
            Stencil {
                start,
                len: 4,
                weights: w,
            }
        }
    }
}

/// Stencil for `y` on strictly increasing, possibly non-uniform nodes.
pub fn stencil(nodes: &[f64], y: f64, interp: Interp) -> Stencil {
    let n = nodes.len();
    if y <= nodes[0] {
        return point(0);
    }
    if y >= nodes[n - 1] {
        return point(n - 1);
    }
    let j = nodes.partition_point(|&v| v <= y).saturating_sub(1).min(n - 2);
    match interp {
        Interp::Linear => linear(j, (y - nodes[j]) / (nodes[j + 1] - nodes[j])),
        Interp::Cubic => {
            if n < 4 {
                return linear(j, (y - nodes[j]) / (nodes[j + 1] - nodes[j]));
            }
            let start = j.saturating_sub(1).min(n - 4);
            let xs = &nodes[start..start + 4];
            let mut w = [0.0; 4];
            for (k, wk) in w.iter_mut().enumerate() {
                let mut l = 1.0;
                for m in 0..4 {
                    if m != k {
                        l *= (y - xs[m]) / (xs[k] - xs[m]);
                    }
                }
                *wk = l;
            }
            Stencil {
                start,
                len: 4,
                weights: w,
            }
        }
    }
}

fn point(j: usize) -> Stencil {
    Stencil {
        start: j,
        len: 1,
        weights: [1.0, 0.0, 0.0, 0.0],
    }
}

fn linear(j: usize, s: f64) -> Stencil {
    Stencil {
        start: j,
        len: 2,
        weights: [1.0 - s, s, 0.0, 0.0],
    }
}
