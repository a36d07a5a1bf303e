//! Command-line driver: argument parsing, configuration resolution and exit codes.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 invariant violation,
//! 3 numerical blow-up.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{parse_config, ConfigError, ExperimentConfig, Format, GridSpec, MultiplierMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVARIANT: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {0}: {1}")]
    Output(PathBuf, std::io::Error),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Output(..) => EXIT_USAGE,
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Numerical(_) => EXIT_BLOWUP,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kdvb", version, about = "Experiments for the fractionally dissipative KdV-Burgers equation")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Sobolev index.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    #[arg(long, global = true)]
    pub half_width: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct TimeArgs {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time-step the equation and write the trajectory.
    Solve {
        #[command(flatten)]
        time: TimeArgs,
    },
    /// Picard iteration of the Duhamel map, checked against the time stepper.
    Picard {
        #[command(flatten)]
        time: TimeArgs,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Growth of the second iterate for the high-frequency packets.
    Inflate {
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        n_min_exp: Option<i32>,
        #[arg(long, allow_negative_numbers = true)]
        n_max_exp: Option<i32>,
    },
    /// Norm estimates for the dyadic blocks or for the weighted multiplier.
    Multiplier {
        #[arg(long, value_enum)]
        mode: Option<MultiplierMode>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        n_max_exp: Option<i32>,
        #[arg(long)]
        l_max_exp: Option<i32>,
        #[arg(long)]
        c_max: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Sobolev norms of the initial data and of its linear evolutions.
    Norms,
}

/// File values, then flag overrides.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let c = &cli.common;
    if let Some(a) = c.alpha {
        cfg.equation.alpha = a;
    }
    if let Some(s) = c.s {
        cfg.equation.s = s;
    }
    if c.grid_n.is_some() || c.half_width.is_some() {
        let g = cfg.grid.unwrap_or_default();
        cfg.grid = Some(GridSpec {
            n: c.grid_n.unwrap_or(g.n),
            half_width: c.half_width.unwrap_or(g.half_width),
        });
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if let Some(f) = c.format {
        cfg.format = f;
    }
    match &cli.command {
        Command::Solve { time } | Command::Picard { time, .. } => {
            if let Some(dt) = time.dt {
                cfg.solver.dt = dt;
            }
            if let Some(t) = time.t_final {
                cfg.solver.t_final = t;
            }
            if let Command::Picard {
                iterations: Some(k), ..
            } = cli.command
            {
                cfg.solver.picard_iterations = k;
            }
        }
        Command::Inflate { t, n_min_exp, n_max_exp } => {
            if let Some(t) = t {
                cfg.inflate.t = *t;
            }
            if let Some(a) = n_min_exp {
                cfg.inflate.n_exponents.0 = *a;
            }
            if let Some(b) = n_max_exp {
                cfg.inflate.n_exponents.1 = *b;
            }
        }
        Command::Multiplier {
            mode,
            resolution,
            restarts,
            n_max_exp,
            l_max_exp,
            c_max,
            rho,
        } => {
            let m = &mut cfg.multiplier;
            if let Some(v) = mode {
                m.mode = *v;
            }
            if let Some(v) = resolution {
                m.resolution = *v;
            }
            if let Some(v) = restarts {
                m.estimate.restarts = *v;
            }
            if let Some(v) = n_max_exp {
                m.ranges.n.1 = *v;
            }
            if let Some(v) = l_max_exp {
                m.ranges.l.1 = *v;
            }
            if let Some(v) = c_max {
                m.c_max = *v;
            }
            if let Some(v) = rho {
                cfg.equation.rho = *v;
            }
        }
        Command::Norms => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = resolve(&cli).and_then(|cfg| commands::execute(&cli.command, &cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("kdvb: {e}");
            e.exit_code()
        }
    }
}
