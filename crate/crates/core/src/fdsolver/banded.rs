//! Banded LU factorisation with partial pivoting.
//!
//! Row `r` stores columns `r - kl ..= r + ku + kl`; the extra `kl`
//! super-diagonals hold the fill produced by row interchanges. Interchanges
//! are applied to the trailing columns only, so `L` is kept as a product of
//! elementary transforms and the solve replays them in order.

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            piv: vec![0; n],
        };
        for i in 0..n {
            for (c, v) in a.row(i) {
                let k = lu.idx(i, c);
                lu.data[k] = v;
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.ku + self.kl);
        r * self.width + (c + self.kl - r)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::LinearSolve(format!("singular pivot in column {k}")));
            }
            self.piv[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.idx(k, c), self.idx(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for r in k + 1..=last_row {
                let rk = self.idx(r, k);
                let l = self.data[rk] / pivot;
                self.data[rk] = l;
                if l == 0.0 {
                    continue;
                }
                let base_k = self.idx(k, k + 1);
                let base_r = self.idx(r, k + 1);
                for off in 0..last_col - k {
                    self.data[base_r + off] -= l * self.data[base_k + off];
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl) = (self.n, self.kl);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    b[r] -= self.data[self.idx(r, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.ku + kl).min(n - 1);
            let base = self.idx(k, k);
            let mut s = b[k];
            for (off, c) in (k + 1..=last_col).enumerate() {
                s -= self.data[base + 1 + off] * b[c];
            }
            b[k] = s / self.data[base];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_banded_systems_needing_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, kl, ku) in &[(1usize, 0usize, 0usize), (12, 1, 1), (40, 3, 5), (60, 7, 2)] {
            let rows = (0..n).map(|i| {
                let lo = i.saturating_sub(kl);
                let hi = (i + ku).min(n - 1);
                (lo..=hi)
                    .map(|c| (c, if c == i { rng.gen_range(-0.1..0.1) } else { rng.gen_range(-1.0..1.0) }))
                    .collect::<Vec<_>>()
            });
            let a = CsrMatrix::from_rows(n, rows.collect::<Vec<_>>());
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut b = a.mul_vec(&x);
            let lu = BandedLu::factor(&a).unwrap();
            lu.solve_in_place(&mut b);
            let dense = a.to_dense();
            let cond_guard = dense.norm() * dense.clone().try_inverse().unwrap().norm();
            for (u, v) in b.iter().zip(&x) {
                assert!((u - v).abs() < 1e-13 * cond_guard, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_rows(2, vec![vec![(0, 1.0), (1, 2.0)], vec![(0, 2.0), (1, 4.0)]]);
        assert!(BandedLu::factor(&a).is_err());
    }
}
