use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};

use lsabr_core::fdsolver::{assemble, steps_for, Generator, Stepper, ThetaScheme};
use lsabr_core::io::{fingerprint, fmt_f64, write_field_csv};
use lsabr_core::model::{payoff_sample, weighted_l2_distance, weighted_l2_norm, PayoffKind, SigmaProfile};
use lsabr_core::semigroups::{
    composite_apply, heat_apply, kernel_density, price_zero_volvol, transport_apply_with, Ordering,
};
use lsabr_core::verify::{
    default_study, run_error_study, run_garding_suite, run_identity_suite, run_oracle_suite, run_smoothing_suite,
    study_datum, OracleSetup,
};
use lsabr_core::{Error, Field, Grid2D, Payoff, WeightSpec};

use crate::config::{GridDefault, PayoffChoice, RunConfig, SigmaChoice, Suite};

/// Exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_STUDY_INVALID: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    /// Bad input: exit 2.
    Config(anyhow::Error),
    /// Failure while running: exit 1.
    Run(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Run(_) => EXIT_FAIL,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Run(e) => e,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_)
            | Error::InvalidGrid(_)
            | Error::InvalidArgument(_)
            | Error::NegativeTime(_)
            | Error::Parse(_)
            | Error::Unstable(_)
            | Error::Degenerate(_)
            | Error::TooLarge(_) => Failure::Config(e.into()),
            _ => Failure::Run(e.into()),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(anyhow!(msg.into()))
}

pub type CmdResult = Result<u8, Failure>;

const PRICE_GRID: GridDefault = GridDefault { n_sigma: 12, n_x: 41, x_min: -2.0, x_max: 2.0 };
const FD_GRID: GridDefault = GridDefault { n_sigma: 56, n_x: 121, x_min: -5.0, x_max: 5.0 };
const IDENTITY_GRID: GridDefault = GridDefault { n_sigma: 111, n_x: 481, x_min: -6.0, x_max: 6.0 };
const GARDING_GRID: GridDefault = GridDefault { n_sigma: 31, n_x: 61, x_min: -4.0, x_max: 4.0 };
const STUDY_GRID: GridDefault = GridDefault { n_sigma: 221, n_x: 161, x_min: -4.0, x_max: 4.0 };

fn build_grid(c: &RunConfig, d: GridDefault) -> Result<Arc<Grid2D>, Failure> {
    let s = c.grid_spec(d);
    Ok(Arc::new(Grid2D::uniform(&c.params, s.n_sigma, s.x_min, s.x_max, s.n_x)?))
}

/// Writes to `out`, or to stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
    .map_err(Failure::Run)
}

fn header(c: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut s = format!("# fingerprint={}\n", c.fingerprint());
    for (k, v) in extra {
        s += &format!("# {k}={v}\n");
    }
    s
}

fn check_sigma(c: &RunConfig, sigma: f64) -> Result<(), Failure> {
    let p = &c.params;
    if !(p.alpha..=p.beta).contains(&sigma) {
        return Err(config_err(format!("sigma = {sigma} lies outside [{}, {}]", p.alpha, p.beta)));
    }
    Ok(())
}

/// Rows `(sigma, x, t, price)` of the zero-volvol call price, at one point
/// or over the whole grid.
pub fn price(c: &RunConfig, sigma: Option<f64>, x: Option<f64>, out: Option<&Path>) -> CmdResult {
    let t = c.t.unwrap_or(1.0);
    let points: Vec<(f64, f64)> = match (sigma, x) {
        (Some(s), Some(x)) => {
            check_sigma(c, s)?;
            vec![(s, x)]
        }
        (None, None) => {
            let g = build_grid(c, PRICE_GRID)?;
            g.sigma().iter().flat_map(|&s| g.x().iter().map(move |&x| (s, x))).collect()
        }
        _ => return Err(config_err("--sigma and --x must be given together")),
    };
    let mut text = header(c, &[("strike", fmt_f64(c.strike))]);
    text += "sigma,x,t,price\n";
    for (s, x) in points {
        let v = price_zero_volvol(&c.params, t, c.strike, s, x)?;
        text += &format!("{},{},{},{}\n", fmt_f64(s), fmt_f64(x), fmt_f64(t), fmt_f64(v));
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}

/// One row `(sigma, x, y, t, density)`.
pub fn kernel(c: &RunConfig, sigma: f64, x: f64, y: f64, out: Option<&Path>) -> CmdResult {
    check_sigma(c, sigma)?;
    let t = c.t.unwrap_or(1.0);
    let d = kernel_density(&c.params, t, sigma, x, y)?;
    let mut text = header(c, &[]);
    text += "sigma,x,y,t,density\n";
    text += &format!("{},{},{},{},{}\n", fmt_f64(sigma), fmt_f64(x), fmt_f64(y), fmt_f64(t), fmt_f64(d));
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn initial_field(c: &RunConfig, g: &Arc<Grid2D>) -> Result<Field, Failure> {
    let kind = match c.payoff {
        PayoffChoice::Call => PayoffKind::Call { strike: c.strike },
        PayoffChoice::Bump => PayoffKind::GaussianBump { center: c.bump_center, width: c.bump_width },
    };
    let p = &c.params;
    let profile = match c.sigma_profile {
        SigmaChoice::Constant => SigmaProfile::Constant,
        SigmaChoice::Bump => SigmaProfile::bump(
            g,
            c.sigma_center.unwrap_or(0.5 * (p.alpha + p.beta)),
            c.sigma_radius.unwrap_or(0.4 * (p.beta - p.alpha)),
        ),
    };
    Ok(payoff_sample(&Payoff::new(kind, profile)?, g)?)
}

/// The exact flow of the generator when one is available in closed form.
fn exact_solution(c: &RunConfig, t: f64, h: &Field) -> Result<Option<Field>, Failure> {
    let p = &c.params;
    let q = &c.quadrature;
    Ok(match c.generator {
        Generator::L0 => Some(composite_apply(p, t, h, q, Ordering::HeatAfterTransport)?.field),
        Generator::L if p.nu == 0.0 => Some(composite_apply(p, t, h, q, Ordering::HeatAfterTransport)?.field),
        Generator::A => Some(transport_apply_with(p, t, h, q.interp)?),
        Generator::B => Some(heat_apply(&vec![t; h.grid().n_sigma()], h, q)?.field),
        _ => None,
    })
}

/// Steps the chosen generator to `t` and writes the final field as a CSV
/// checkpoint. The header records the difference to a run at twice the step
/// and, where a closed form exists, the distance to it; both relative to
/// `‖h‖`.
pub fn fd_solve(c: &RunConfig, out: Option<&Path>) -> CmdResult {
    let t = c.t.unwrap_or(1.0);
    let g = build_grid(c, FD_GRID)?;
    let h = initial_field(c, &g)?;
    let op = assemble(&c.params, &g, c.generator)?;
    let h0 = op.restrict(&h)?;
    let w = WeightSpec::from(&c.params);
    let hn = weighted_l2_norm(&h0, &w);

    let (n, dt) = steps_for(t, c.dt);
    let u = Stepper::new(&op, ThetaScheme::new(c.theta_weight, dt)?)?.advance(&h0, n)?;
    let (n2, dt2) = steps_for(t, 2.0 * dt);
    let u2 = Stepper::new(&op, ThetaScheme::new(c.theta_weight, dt2)?)?.advance(&h0, n2)?;
    let rel = |a: &Field, b: &Field| -> Result<f64, Failure> {
        Ok(if hn > 0.0 { weighted_l2_distance(a, b, &w)? / hn } else { 0.0 })
    };
    let self_diff = rel(&u, &u2)?;

    let mut meta = BTreeMap::new();
    meta.insert("fingerprint".to_string(), c.fingerprint());
    meta.insert("params_hash".to_string(), fingerprint(&c.params));
    meta.insert("generator".to_string(), c.generator.to_string());
    meta.insert("t".to_string(), fmt_f64(t));
    meta.insert("dt".to_string(), fmt_f64(dt));
    meta.insert("steps".to_string(), n.to_string());
    meta.insert("theta_weight".to_string(), fmt_f64(c.theta_weight));
    meta.insert("self_difference".to_string(), fmt_f64(self_diff));
    let mut summary = format!("{} to t = {t} in {n} steps of {dt}: self difference {self_diff:.3e}", c.generator);
    if let Some(exact) = exact_solution(c, t, &h0)? {
        let d = rel(&u, &op.restrict(&exact)?)?;
        meta.insert("reference_difference".to_string(), fmt_f64(d));
        summary += &format!(", closed form distance {d:.3e}");
    }
    let mut buf = vec![];
    write_field_csv(&mut buf, &u, &meta)?;
    emit(out, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
    eprintln!("{summary}");
    Ok(EXIT_OK)
}

fn with_fingerprint(c: &RunConfig, value: impl serde::Serialize) -> String {
    let mut v = serde_json::to_value(value).expect("report serialises");
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("fingerprint".into(), c.fingerprint().into());
    }
    serde_json::to_string_pretty(&v).expect("json") + "\n"
}

/// Runs one suite; exit 0 iff every check passes. The JSON report is written
/// either way.
pub fn verify(c: &RunConfig, out: Option<&Path>) -> CmdResult {
    let suite = c.suite.ok_or_else(|| config_err("verify needs --suite (identities, oracle, garding or smoothing)"))?;
    let p = &c.params;
    let report = match suite {
        Suite::Identities => run_identity_suite(p, &build_grid(c, IDENTITY_GRID)?, &c.quadrature, 1e-6)?,
        Suite::Oracle => {
            let mut s = OracleSetup { params: *p, ..OracleSetup::default() };
            if let Some(t) = c.t {
                s.t = t;
            }
            s.main.2 = c.dt;
            s.coarse.2 = 2.0 * c.dt;
            if c.grid_is_set() {
                let d = GridDefault { n_sigma: s.main.0, n_x: s.main.1, x_min: s.x_min, x_max: s.x_max };
                let g = c.grid_spec(d);
                s.main = (g.n_sigma, g.n_x, c.dt);
                s.coarse = (g.n_sigma.div_ceil(2), g.n_x.div_ceil(2), 2.0 * c.dt);
                s.x_min = g.x_min;
                s.x_max = g.x_max;
            }
            run_oracle_suite(&s, &c.quadrature)?
        }
        Suite::Garding => run_garding_suite(p, &build_grid(c, GARDING_GRID)?, c.trials, c.seed)?,
        Suite::Smoothing => run_smoothing_suite(p, &c.quadrature)?,
    };
    emit(out, &with_fingerprint(c, &report))?;
    eprint!("{}", report.to_text());
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAIL })
}

/// `(nu, error)` CSV and the full report as JSON. With `--out PATH` the CSV
/// goes to PATH and the JSON next to it with a `.json` extension; otherwise
/// the JSON goes to stdout.
pub fn error_study(c: &RunConfig, out: Option<&Path>) -> CmdResult {
    let mut s = default_study();
    s.params = c.params;
    if c.grid_is_set() {
        let g = build_grid(c, STUDY_GRID)?;
        s.h = study_datum(&g);
        s.grid = g;
    }
    s.t = c.t.unwrap_or(s.t);
    s.scheme = ThetaScheme::new(c.theta_weight, c.dt)?;
    s.nu_values = c.nu_list.clone();
    s.quadrature = c.quadrature;
    let r = run_error_study(&s)?;

    let slope = r.fitted_slope.map_or("none".to_string(), fmt_f64);
    let mut csv = header(c, &[("fitted_slope", slope.clone()), ("fd_floor", fmt_f64(r.fd_floor))]);
    csv += "nu,error\n";
    for (nu, e) in r.nu_values.iter().zip(&r.errors) {
        csv += &format!("{},{}\n", fmt_f64(*nu), fmt_f64(*e));
    }
    let json = with_fingerprint(c, &r);
    match out {
        Some(p) => {
            emit(Some(p), &csv)?;
            emit(Some(&p.with_extension("json")), &json)?;
        }
        None => emit(None, &json)?,
    }
    eprintln!("slope {slope}, fd_floor {:.3e}", r.fd_floor);
    if r.is_valid() {
        Ok(EXIT_OK)
    } else {
        eprintln!("study invalid: {:?}", r.status);
        Ok(EXIT_STUDY_INVALID)
    }
}
