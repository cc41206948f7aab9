//! Browser bindings for the demo page in `www/`.
//!
//! Each export returns a flat `Float64Array`; errors surface as JS
//! exceptions carrying the library message.

use std::sync::Arc;

use lsabr_core::model::linspace;
use lsabr_core::semigroups::{composite_apply, kernel_density, price_zero_volvol, Ordering, QuadratureSpec};
use lsabr_core::{Field, Grid2D, ModelParams, Result};
use wasm_bindgen::prelude::*;

fn params(kappa: f64, theta: f64, alpha: f64, beta: f64) -> Result<ModelParams> {
    ModelParams::new(kappa, theta, 0.0, 0.0, alpha, beta, 0.0)
}

/// Kernel density over `n` points `y ∈ [y_min, y_max]`.
pub fn kernel_curve_impl(
    p: &ModelParams,
    t: f64,
    sigma: f64,
    x: f64,
    y_min: f64,
    y_max: f64,
    n: usize,
) -> Result<Vec<f64>> {
    linspace(y_min, y_max, n).into_iter().map(|y| kernel_density(p, t, sigma, x, y)).collect()
}

/// Zero-volvol call prices over `n` points `x ∈ [x_min, x_max]`.
pub fn price_curve_impl(
    p: &ModelParams,
    t: f64,
    strike: f64,
    sigma: f64,
    x_min: f64,
    x_max: f64,
    n: usize,
) -> Result<Vec<f64>> {
    linspace(x_min, x_max, n).into_iter().map(|x| price_zero_volvol(p, t, strike, sigma, x)).collect()
}

/// `S(t)h` for a Gaussian datum centred at `(sigma0, 0)`, on an
/// `n_sigma × n_x` grid over the strip and `x ∈ [-3, 3]`; σ-major.
pub fn composite_heatmap_impl(p: &ModelParams, t: f64, sigma0: f64, n_sigma: usize, n_x: usize) -> Result<Vec<f64>> {
    let g = Arc::new(Grid2D::uniform(p, n_sigma, -3.0, 3.0, n_x)?);
    let w = 0.1 * (p.beta - p.alpha);
    let h = Field::from_fn(g.clone(), |s, x| {
        let a = (s - sigma0) / w;
        (-0.5 * a * a - 2.0 * x * x).exp()
    });
    let q = QuadratureSpec::trapezoid(201, 8.0);
    Ok(composite_apply(p, t, &h, &q, Ordering::HeatAfterTransport)?.field.into_values())
}

fn js(r: Result<Vec<f64>>) -> std::result::Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn kernel_curve(
    kappa: f64,
    theta: f64,
    alpha: f64,
    beta: f64,
    t: f64,
    sigma: f64,
    x: f64,
    y_min: f64,
    y_max: f64,
    n: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(params(kappa, theta, alpha, beta).and_then(|p| kernel_curve_impl(&p, t, sigma, x, y_min, y_max, n)))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn price_curve(
    kappa: f64,
    theta: f64,
    alpha: f64,
    beta: f64,
    t: f64,
    strike: f64,
    sigma: f64,
    x_min: f64,
    x_max: f64,
    n: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(params(kappa, theta, alpha, beta).and_then(|p| price_curve_impl(&p, t, strike, sigma, x_min, x_max, n)))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn composite_heatmap(
    kappa: f64,
    theta: f64,
    alpha: f64,
    beta: f64,
    t: f64,
    sigma0: f64,
    n_sigma: usize,
    n_x: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    js(params(kappa, theta, alpha, beta).and_then(|p| composite_heatmap_impl(&p, t, sigma0, n_sigma, n_x)))
}
