//! Command-line driver for the `slqwave` solver: configuration handling
//! and the `simulate`, `optimize`, `convergence` and `oracle-check`
//! subcommands, each writing CSV artifacts into an output directory.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Preset};
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "slqwave",
    version,
    about = "Stochastic LQ control of the wave equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Optimize one seeded path and write control and state surfaces.
    Simulate,
    /// Monte Carlo batch: cost decay, histogram and residuals.
    Optimize,
    /// Time and mesh refinement study.
    Convergence,
    /// Compare the descent with the exact scenario-tree optimum.
    OracleCheck,
}

impl Command {
    pub fn default_preset(self) -> Preset {
        match self {
            Command::Simulate | Command::Optimize => Preset::Example1,
            Command::Convergence => Preset::Rates,
            Command::OracleCheck => Preset::Tree,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat `key = value` file applied on top of the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// example1, tree or rates (default depends on the subcommand).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    /// Factor on the noise coefficients (0, 0.1 and 1 give the zero, small
    /// and large regimes).
    #[arg(long, global = true)]
    pub noise_scale: Option<f64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

/// Resolves preset, then config file, then flags.
pub fn resolve(command: Command, args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let preset = match &args.preset {
        Some(name) => Preset::parse(name).ok_or_else(|| CliError::Config {
            origin: config::Origin::Flag,
            msg: format!("--preset: unknown preset `{name}` (expected example1, tree or rates)"),
        })?,
        None => match &args.config {
            Some(path) => config::preset_in_file(path)?.unwrap_or(command.default_preset()),
            None => command.default_preset(),
        },
    };
    let mut cfg = ExperimentConfig::preset(preset);
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    cfg.set_flag("seed", args.seed, |c, v| c.seed = v);
    cfg.set_flag("samples", args.samples, |c, v| c.samples = v);
    cfg.set_flag("iters", args.iters, |c, v| c.iters = v);
    cfg.set_flag("noise_scale", args.noise_scale, |c, v| c.noise_scale = v);
    cfg.set_flag("out", args.out.clone(), |c, v| c.out = v);
    cfg.validate()?;
    Ok(cfg)
}

/// Runs `cli` and returns human-readable report lines.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let cfg = resolve(cli.command, &cli.common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.workers {
        if n == 0 {
            return Err(CliError::Config {
                origin: config::Origin::Flag,
                msg: "--workers: must be at least 1".into(),
            });
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    pool.install(|| {
        let mut lines = Vec::new();
        let written = match cli.command {
            Command::Simulate => commands::simulate(&cfg)?,
            Command::Optimize => commands::optimize(&cfg)?,
            Command::Convergence => commands::convergence(&cfg)?,
            Command::OracleCheck => {
                let (written, s) = commands::oracle_check(&cfg)?;
                lines.push(format!(
                    "{} scenarios, {} iterations: max |U - U*| = {:e}, descent residual = {:e}, first-order residual = {:e}",
                    s.scenarios, s.iterations, s.max_abs, s.descent_residual, s.first_order_residual
                ));
                for p in &written {
                    lines.push(format!("wrote {}", p.display()));
                }
                s.check(&cfg)?;
                return Ok(lines);
            }
        };
        lines.extend(written.iter().map(|p| format!("wrote {}", p.display())));
        Ok(lines)
    })
}
