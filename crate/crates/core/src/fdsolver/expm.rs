//! Dense matrix exponential oracle for small grids.

use nalgebra::DMatrix;

use super::FDOperator;
use crate::error::{Error, Result};

/// Largest operator size accepted by [`expm_oracle`].
pub const EXPM_MAX_UNKNOWNS: usize = 4000;

/// `e^A` for a square matrix, via nalgebra's scaling-and-squaring Padé
/// exponential.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument("expm needs a square matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("expm input is not finite".into()));
    }
    let e = a.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(e)
}

/// Dense `e^{t·M}` for the operator's matrix `M`.
pub fn expm_oracle(op: &FDOperator, t: f64) -> Result<DMatrix<f64>> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let n = op.n_unknowns();
    if n > EXPM_MAX_UNKNOWNS {
        return Err(Error::TooLarge(format!(
            "{n} unknowns exceed the dense exponential limit of {EXPM_MAX_UNKNOWNS}"
        )));
    }
    expm(&(op.matrix().to_dense() * t))
}
