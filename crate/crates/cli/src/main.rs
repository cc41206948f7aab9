mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use commands::{CmdResult, Failure};
use config::RunConfig;

const AFTER_HELP: &str = "\
Configuration: flat `key = value` lines with `#` comments. Values come from
built-in defaults, then the --config file, then flags; later sources win.
Unknown keys are rejected. Accepted keys:
  model:      kappa theta nu rho alpha beta lambda
  grid:       grid (NSIGMAxNX) n_sigma n_x x_min x_max
  quadrature: quadrature (trapezoid|gauss-hermite) quad_points quad_width
              gh_order interp (linear|cubic)
  scheme:     theta_weight dt
  run:        t strike generator suite nu_list seed trials
  payoff:     payoff (call|bump) bump_center bump_width
              sigma_profile (constant|bump) sigma_center sigma_radius

Exit codes: 0 success, 1 failed check or solver failure, 2 configuration
error, 3 error study invalidated by its finite-difference floor.";

#[derive(Debug, Parser)]
#[command(name = "lsabr", version, about = "Zero-volvol lambda-SABR pricing, finite-difference solves and verification", after_help = AFTER_HELP)]
struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Horizon t (default 1; 0.5 for the oracle suite).
    #[arg(long, global = true, allow_hyphen_values = true)]
    t: Option<f64>,
    /// Call strike K (default 1).
    #[arg(long, global = true)]
    strike: Option<f64>,
    /// Volvol ν. For error-study: comma-separated study values.
    #[arg(long, global = true, value_name = "NU")]
    nu: Option<String>,
    /// Generator for fd-solve: L, L0, A, B, L1 or L2 (default L).
    #[arg(long, global = true)]
    generator: Option<String>,
    /// Suite for verify: identities, oracle, garding or smoothing.
    #[arg(long, global = true)]
    suite: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Seed of the random trial fields (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid size as NSIGMAxNX.
    #[arg(long, global = true, value_name = "NSIGMAxNX")]
    grid: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Zero-volvol call prices as rows (sigma, x, t, price), at one point or
    /// over the whole grid.
    Price {
        /// Volatility of the single point (with --x).
        #[arg(long)]
        sigma: Option<f64>,
        /// Log-forward of the single point (with --sigma).
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
    },
    /// Finite-difference solve of a generator; writes a CSV checkpoint.
    FdSolve,
    /// Runs a verification suite and writes its JSON report.
    Verify,
    /// Volvol error study: (nu, error) CSV and a JSON report.
    ErrorStudy,
    /// Pricing kernel density at one point.
    Kernel {
        #[arg(long)]
        sigma: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut c = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Config)?;
            RunConfig::from_text(&text).map_err(Failure::Config)?
        }
        None => RunConfig::default(),
    };
    let study = matches!(cli.command, Command::ErrorStudy);
    let mut flags: Vec<(&str, String)> = vec![];
    if let Some(v) = cli.t {
        flags.push(("t", v.to_string()));
    }
    if let Some(v) = cli.strike {
        flags.push(("strike", v.to_string()));
    }
    if let Some(v) = &cli.nu {
        flags.push((if study { "nu_list" } else { "nu" }, v.clone()));
    }
    if let Some(v) = &cli.generator {
        flags.push(("generator", v.clone()));
    }
    if let Some(v) = &cli.suite {
        flags.push(("suite", v.clone()));
    }
    if let Some(v) = cli.seed {
        flags.push(("seed", v.to_string()));
    }
    if let Some(v) = &cli.grid {
        flags.push(("grid", v.clone()));
    }
    for (k, v) in flags {
        c.set(k, &v).map_err(|e| Failure::Config(e.context(format!("--{}", k.replace('_', "-")))))?;
    }
    c.validate().map_err(Failure::Config)?;
    Ok(c)
}

fn run(cli: &Cli) -> CmdResult {
    let c = load_config(cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Price { sigma, x } => commands::price(&c, *sigma, *x, out),
        Command::FdSolve => commands::fd_solve(&c, out),
        Command::Verify => commands::verify(&c, out),
        Command::ErrorStudy => commands::error_study(&c, out),
        Command::Kernel { sigma, x, y } => commands::kernel(&c, *sigma, *x, *y, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
