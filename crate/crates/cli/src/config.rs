//! Flat `key = value` run configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, command
//! line flags. Grid size, x-range and horizon left unset fall back to a
//! per-command default.

use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use lsabr_core::fdsolver::{Generator, ThetaScheme};
use lsabr_core::interp::Interp;
use lsabr_core::io::parse_key_values;
use lsabr_core::semigroups::{QuadratureRule, QuadratureSpec};
use lsabr_core::ModelParams;

/// Every key accepted in a config file.
pub const KEYS: &[&str] = &[
    "kappa",
    "theta",
    "nu",
    "rho",
    "alpha",
    "beta",
    "lambda",
    "grid",
    "n_sigma",
    "n_x",
    "x_min",
    "x_max",
    "quadrature",
    "quad_points",
    "quad_width",
    "gh_order",
    "interp",
    "theta_weight",
    "dt",
    "t",
    "strike",
    "generator",
    "suite",
    "nu_list",
    "seed",
    "trials",
    "payoff",
    "bump_center",
    "bump_width",
    "sigma_profile",
    "sigma_center",
    "sigma_radius",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Identities,
    Oracle,
    Garding,
    Smoothing,
}

impl FromStr for Suite {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "identities" => Suite::Identities,
            "oracle" => Suite::Oracle,
            "garding" => Suite::Garding,
            "smoothing" => Suite::Smoothing,
            _ => bail!("unknown suite {s:?} (expected identities, oracle, garding or smoothing)"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffChoice {
    Call,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaChoice {
    Constant,
    Bump,
}

/// Grid used when the configuration leaves it open.
#[derive(Debug, Clone, Copy)]
pub struct GridDefault {
    pub n_sigma: usize,
    pub n_x: usize,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n_sigma: Option<usize>,
    pub n_x: Option<usize>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub quadrature: QuadratureSpec,
    pub theta_weight: f64,
    pub dt: f64,
    pub t: Option<f64>,
    pub strike: f64,
    pub generator: Generator,
    pub suite: Option<Suite>,
    pub nu_list: Vec<f64>,
    pub seed: u64,
    pub trials: usize,
    pub payoff: PayoffChoice,
    pub bump_center: f64,
    pub bump_width: f64,
    pub sigma_profile: SigmaChoice,
    pub sigma_center: Option<f64>,
    pub sigma_radius: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::study_default().with_nu(0.2),
            n_sigma: None,
            n_x: None,
            x_min: None,
            x_max: None,
            quadrature: QuadratureSpec::default().with_interp(Interp::Cubic),
            theta_weight: 0.5,
            dt: 0.01,
            t: None,
            strike: 1.0,
            generator: Generator::L,
            suite: None,
            nu_list: vec![0.05, 0.1, 0.2, 0.4],
            seed: 42,
            trials: 200,
            payoff: PayoffChoice::Bump,
            bump_center: 0.0,
            bump_width: 0.5,
            sigma_profile: SigmaChoice::Bump,
            sigma_center: None,
            sigma_radius: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse {v:?}: {e}"))
}

/// `NSIGMAxNX`, e.g. `111x481`.
pub fn parse_grid(v: &str) -> Result<(usize, usize)> {
    let (a, b) = v
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("grid: expected NSIGMAxNX, got {v:?}"))?;
    Ok((num("grid", a.trim())?, num("grid", b.trim())?))
}

pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut kv = parse_key_values(text)?;
        // the rule must be chosen before its own settings
        if let Some(v) = kv.remove("quadrature") {
            c.set("quadrature", &v)?;
        }
        for (k, v) in kv {
            c.set(&k, &v)?;
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "kappa" => p.kappa = num(key, v)?,
            "theta" => p.theta = num(key, v)?,
            "nu" => p.nu = num(key, v)?,
            "rho" => p.rho = num(key, v)?,
            "alpha" => p.alpha = num(key, v)?,
            "beta" => p.beta = num(key, v)?,
            "lambda" => p.lambda = num(key, v)?,
            "grid" => {
                let (a, b) = parse_grid(v)?;
                self.n_sigma = Some(a);
                self.n_x = Some(b);
            }
            "n_sigma" => self.n_sigma = Some(num(key, v)?),
            "n_x" => self.n_x = Some(num(key, v)?),
            "x_min" => self.x_min = Some(num(key, v)?),
            "x_max" => self.x_max = Some(num(key, v)?),
            "quadrature" => {
                self.quadrature.rule = match v.to_ascii_lowercase().as_str() {
                    "trapezoid" => QuadratureRule::Trapezoid { points: 801, width: 8.0 },
                    "gauss-hermite" | "gauss_hermite" => QuadratureRule::GaussHermite { order: 64 },
                    _ => bail!("quadrature: expected trapezoid or gauss-hermite, got {v:?}"),
                }
            }
            "quad_points" | "quad_width" => match &mut self.quadrature.rule {
                QuadratureRule::Trapezoid { points, width } => {
                    if key == "quad_points" {
                        *points = num(key, v)?;
                    } else {
                        *width = num(key, v)?;
                    }
                }
                _ => bail!("{key} applies to the trapezoid rule; set quadrature = trapezoid first"),
            },
            "gh_order" => match &mut self.quadrature.rule {
                QuadratureRule::GaussHermite { order } => *order = num(key, v)?,
                _ => bail!("gh_order applies to gauss-hermite; set quadrature = gauss-hermite first"),
            },
            "interp" => {
                self.quadrature.interp = match v.to_ascii_lowercase().as_str() {
                    "linear" => Interp::Linear,
                    "cubic" => Interp::Cubic,
                    _ => bail!("interp: expected linear or cubic, got {v:?}"),
                }
            }
            "theta_weight" => self.theta_weight = num(key, v)?,
            "dt" => self.dt = num(key, v)?,
            "t" => self.t = Some(num(key, v)?),
            "strike" => self.strike = num(key, v)?,
            "generator" => self.generator = v.parse()?,
            "suite" => self.suite = Some(v.parse()?),
            "nu_list" => self.nu_list = parse_list(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "trials" => self.trials = num(key, v)?,
            "payoff" => {
                self.payoff = match v.to_ascii_lowercase().as_str() {
                    "call" => PayoffChoice::Call,
                    "bump" => PayoffChoice::Bump,
                    _ => bail!("payoff: expected call or bump, got {v:?}"),
                }
            }
            "bump_center" => self.bump_center = num(key, v)?,
            "bump_width" => self.bump_width = num(key, v)?,
            "sigma_profile" => {
                self.sigma_profile = match v.to_ascii_lowercase().as_str() {
                    "constant" => SigmaChoice::Constant,
                    "bump" => SigmaChoice::Bump,
                    _ => bail!("sigma_profile: expected constant or bump, got {v:?}"),
                }
            }
            "sigma_center" => self.sigma_center = Some(num(key, v)?),
            "sigma_radius" => self.sigma_radius = Some(num(key, v)?),
            _ => bail!("unknown config key {key:?}; accepted keys: {}", KEYS.join(", ")),
        }
        Ok(())
    }

    /// Checks everything that does not depend on the command.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.quadrature.validate()?;
        ThetaScheme::new(self.theta_weight, self.dt).context("scheme")?;
        if let Some(t) = self.t {
            if !(t >= 0.0) {
                bail!("t must be >= 0, got {t}");
            }
        }
        if !(self.strike > 0.0) {
            bail!("strike must be > 0, got {}", self.strike);
        }
        if !(self.bump_width > 0.0) {
            bail!("bump_width must be > 0, got {}", self.bump_width);
        }
        if self.trials == 0 {
            bail!("trials must be >= 1");
        }
        if let Some(r) = self.sigma_radius {
            if !(r > 0.0) {
                bail!("sigma_radius must be > 0, got {r}");
            }
        }
        Ok(())
    }

    pub fn grid_spec(&self, d: GridDefault) -> GridDefault {
        GridDefault {
            n_sigma: self.n_sigma.unwrap_or(d.n_sigma),
            n_x: self.n_x.unwrap_or(d.n_x),
            x_min: self.x_min.unwrap_or(d.x_min),
            x_max: self.x_max.unwrap_or(d.x_max),
        }
    }

    pub fn grid_is_set(&self) -> bool {
        self.n_sigma.is_some() || self.n_x.is_some() || self.x_min.is_some() || self.x_max.is_some()
    }

    /// SHA-256 of the resolved configuration.
    pub fn fingerprint(&self) -> String {
        lsabr_core::io::fingerprint(self)
    }
}
