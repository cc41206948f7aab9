use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdsolver::{assemble, steps_for, Generator, Stepper, ThetaScheme};
use crate::interp::Interp;
use crate::model::{sigma_bump, weighted_l2_norm, Field, Grid2D, ModelParams, WeightSpec};
use crate::semigroups::{composite_apply, Ordering, QuadratureSpec};

/// Inputs of a volvol error study.
#[derive(Debug, Clone)]
pub struct StudySetup {
    /// Base parameters; `nu` is overridden by each study point.
    pub params: ModelParams,
    pub nu_values: Vec<f64>,
    pub t: f64,
    pub grid: Arc<Grid2D>,
    pub scheme: ThetaScheme,
    pub h: Field,
    pub quadrature: QuadratureSpec,
}

/// The reference study: `κ = 1, θ = 0.2, I = (0.05, 0.6), ρ = 0.3, λ = 0`,
/// `t = 1`, `ν ∈ {0.05, 0.1, 0.2, 0.4}`, Crank–Nicolson with `dt = 0.01` on a
/// 221 × 161 grid over `x ∈ [-4, 4]`.
///
/// The datum is a Gaussian in x (centre 0, width 0.5) times the bump
/// `(1 - r²)⁴` on `[0.16, 0.31]` in σ. Transport to `t = 1` spreads that
/// support to about `[0.09, 0.49]`, still clear of both σ ends.
pub fn default_study() -> StudySetup {
    let params = ModelParams::study_default();
    let grid = Arc::new(Grid2D::uniform(&params, 221, -4.0, 4.0, 161).expect("valid default grid"));
    let h = study_datum(&grid);
    StudySetup {
        params,
        nu_values: vec![0.05, 0.1, 0.2, 0.4],
        t: 1.0,
        grid,
        scheme: ThetaScheme { theta_weight: 0.5, dt: 0.01 },
        h,
        quadrature: QuadratureSpec::default().with_interp(Interp::Cubic),
    }
}

/// The study datum sampled on `g`.
pub fn study_datum(g: &Arc<Grid2D>) -> Field {
    Field::from_fn(g.clone(), |s, x| sigma_bump(s, 0.235, 0.075) * (-0.5 * (x / 0.5).powi(2)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StudyStatus {
    Valid,
    Invalid { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorStudyReport {
    pub nu_values: Vec<f64>,
    /// `‖u_L(t) - S(t)h‖` in the weighted discrete norm, one per ν.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log e` against `log ν` over the points with
    /// `e > 5 fd_floor`; absent with fewer than two such points.
    pub fitted_slope: Option<f64>,
    pub fit_points: usize,
    /// The same distance at `ν = 0`, i.e. the discretisation error alone.
    pub fd_floor: f64,
    pub h_norm: f64,
    pub dsigma_h_norm: f64,
    /// `max e / (ν (‖h‖ + ν ‖∂σh‖))`.
    pub c_theorem: f64,
    /// `max e / (ν (‖h‖ + ‖∂σh‖))`.
    pub c_intro: f64,
    pub t: f64,
    pub dt: f64,
    pub n_sigma: usize,
    pub n_x: usize,
    #[serde(flatten)]
    pub status: StudyStatus,
}

impl ErrorStudyReport {
    pub fn is_valid(&self) -> bool {
        self.status == StudyStatus::Valid
    }
}

/// Ordinary least-squares slope of `log y` on `log x`.
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Centred σ-differences, one-sided at the ends.
fn dsigma(h: &Field) -> Field {
    let g = h.grid().clone();
    let s = g.sigma();
    let n = s.len();
    let mut out = Field::zeros(g.clone());
    for i in 0..n {
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let inv = 1.0 / (s[b] - s[a]);
        for j in 0..g.n_x() {
            out.set(i, j, (h.get(b, j) - h.get(a, j)) * inv);
        }
    }
    out
}

fn fd_solution(p: &ModelParams, setup: &StudySetup, n_steps: usize, dt: f64) -> Result<Field> {
    let op = assemble(p, &setup.grid, Generator::L)?;
    let scheme = ThetaScheme::new(setup.scheme.theta_weight, dt)?;
    let u0 = op.restrict(&setup.h)?;
    Stepper::new(&op, scheme)?.advance(&u0, n_steps)
}

/// Runs the FD solver for `L` at `ν = 0` and at every study ν and measures
/// each against the closed-form zero-volvol semigroup.
pub fn run_error_study(setup: &StudySetup) -> Result<ErrorStudyReport> {
    setup.params.validate()?;
    setup.quadrature.validate()?;
    if setup.h.grid().as_ref() != setup.grid.as_ref() {
        return Err(Error::GridMismatch("study datum lives on another grid".into()));
    }
    if setup.nu_values.is_empty()
        || setup.nu_values.iter().any(|v| !(*v > 0.0))
        || setup.nu_values.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidArgument(
            "nu values must be positive and strictly increasing".into(),
        ));
    }
    if !(setup.t > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be > 0, got {}", setup.t)));
    }
    for &nu in &setup.nu_values {
        setup.params.clone().with_nu(nu).validate()?;
    }
    let (n_steps, dt) = steps_for(setup.t, setup.scheme.dt);
    let w = WeightSpec::from(&setup.params);
    let reference = composite_apply(&setup.params, setup.t, &setup.h, &setup.quadrature, Ordering::HeatAfterTransport)?.field;

    let mut nus = vec![0.0];
    nus.extend_from_slice(&setup.nu_values);
    let dists: Vec<Result<f64>> = crate::par::map_collect(&nus, |&nu| {
        let p = setup.params.clone().with_nu(nu);
        let u = fd_solution(&p, setup, n_steps, dt)?;
        Ok(weighted_l2_norm(&u.sub(&reference)?, &w))
    });
    let dists = dists.into_iter().collect::<Result<Vec<f64>>>()?;
    let fd_floor = dists[0];
    let errors = dists[1..].to_vec();

    let (fx, fy): (Vec<f64>, Vec<f64>) = setup
        .nu_values
        .iter()
        .zip(&errors)
        .filter(|(_, e)| **e > 5.0 * fd_floor)
        .map(|(a, b)| (*a, *b))
        .unzip();
    let fitted_slope = fit_loglog_slope(&fx, &fy);

    let h_norm = weighted_l2_norm(&setup.h, &w);
    let dsigma_h_norm = weighted_l2_norm(&dsigma(&setup.h), &w);
    let (mut c_theorem, mut c_intro) = (0.0f64, 0.0f64);
    for (&nu, &e) in setup.nu_values.iter().zip(&errors) {
        c_theorem = c_theorem.max(e / (nu * (h_norm + nu * dsigma_h_norm)));
        c_intro = c_intro.max(e / (nu * (h_norm + dsigma_h_norm)));
    }

    let min_err = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let status = if fd_floor < min_err / 5.0 {
        StudyStatus::Valid
    } else {
        StudyStatus::Invalid {
            reason: format!(
                "fd_floor {fd_floor:.3e} is not below a fifth of the smallest error {min_err:.3e}; refine the grid"
            ),
        }
    };
    Ok(ErrorStudyReport {
        nu_values: setup.nu_values.clone(),
        errors,
        fitted_slope,
        fit_points: fx.len(),
        fd_floor,
        h_norm,
        dsigma_h_norm,
        c_theorem,
        c_intro,
        t: setup.t,
        dt,
        n_sigma: setup.grid.n_sigma(),
        n_x: setup.grid.n_x(),
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let x = [0.05, 0.1, 0.2, 0.4];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.25)).collect();
        assert!((fit_loglog_slope(&x, &y).unwrap() - 1.25).abs() < 1e-12);
        assert_eq!(fit_loglog_slope(&[0.1], &[1.0]), None);
        assert_eq!(fit_loglog_slope(&[0.1, 0.2], &[1.0, -1.0]), None);
    }

    fn small_setup() -> StudySetup {
        let mut s = default_study();
        let grid = Arc::new(Grid2D::uniform(&s.params, 56, -4.0, 4.0, 41).unwrap());
        s.h = Field::from_fn(grid.clone(), |sv, x| sigma_bump(sv, 0.235, 0.075) * (-2.0 * x * x).exp());
        s.grid = grid;
        s.scheme.dt = 0.05;
        s
    }

    #[test]
    fn rejects_bad_nu_lists() {
        let mut s = small_setup();
        s.nu_values = vec![0.2, 0.1];
        assert!(run_error_study(&s).is_err());
        s.nu_values = vec![];
        assert!(run_error_study(&s).is_err());
    }

    #[test]
    fn single_nu_has_no_slope_and_coarse_grid_invalidates() {
        let mut s = small_setup();
        s.nu_values = vec![0.1];
        let r = run_error_study(&s).unwrap();
        assert_eq!(r.fitted_slope, None);
        assert_eq!(r.errors.len(), 1);
        assert!(r.errors[0] > 0.0);
        // 56 σ nodes leave the bump barely resolved
        s.nu_values = vec![0.01];
        let r = run_error_study(&s).unwrap();
        assert!(!r.is_valid(), "{r:?}");
    }
}
