//! Zero-volvol λSABR semigroup in closed form, a finite-difference solver for
//! the full λSABR generator on a bounded volatility strip, and a harness that
//! checks the operator identities and the first-order volvol error bound.
//!
//! The generator acting on `u(σ, x)` is
//!
//! ```text
//! L  = A + σ²/2 B + ν L₁ + ν² L₂
//! A  = κ(θ - σ) ∂σ          B  = ∂ₓ² - ∂ₓ
//! L₁ = ρ σ² ∂ₓ∂σ            L₂ = ½ σ² ∂σ²
//! ```
//!
//! with `L₀ = A + σ²/2 B` the degenerate zero-volvol part. Weighted norms
//! measure `‖e^{-λ⟨x⟩} f‖`, so a positive `λ` admits payoffs growing like
//! `e^{λ|x|}`.

pub mod coeffs;
pub mod error;
pub mod fdsolver;
pub mod interp;
pub mod io;
pub mod model;
mod par;
pub mod semigroups;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Field, Grid2D, ModelParams, Payoff, PayoffKind, SigmaProfile, WeightSpec};
