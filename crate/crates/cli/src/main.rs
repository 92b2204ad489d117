//! `mpccert`: certify, benchmark, build PCA parameter sets and simulate from
//! one OCP config.
//!
//! Every data file is a CSV with a commented header naming the units and the
//! hash of the effective config. Re-running a command with the same config
//! and seed reproduces the files byte for byte except for the `generated`
//! line, which honours `SOURCE_DATE_EPOCH`.
//!
//! Exit codes: 0 success, 2 partial result (region budget or iteration cap
//! hit), 1 error.

mod bench;
mod certify;
mod context;
mod pca;
mod sim;
mod theta;

use clap::{Parser, Subcommand, ValueEnum};
use context::Context;
use std::path::PathBuf;
use std::process::ExitCode;
use theta::ThetaSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Flops,
    Wallclock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Daqp,
    Admm,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajectoryChoice {
    Steps,
    FigureEight,
    Hover,
}

#[derive(Debug, Parser)]
#[command(name = "mpccert", version, about)]
pub struct Cli {
    /// Config file, or one of the built-ins `double-integrator` and
    /// `quadrotor`.
    #[arg(long, global = true, default_value = "double-integrator")]
    pub config: String,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Region budget for `certify`; flops per control tick for `sim`.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Mode::Flops)]
    pub mode: Mode,
    /// Solvers to run; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub solver: Option<SolverChoice>,
    /// Input weight preset.
    #[arg(long = "r-preset", global = true, value_parser = ["900", "100", "50"])]
    pub r_preset: Option<String>,
    /// Measurement threads (flops mode only; wall-clock runs on one).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition the parameter set and measure every region's witness.
    Certify {
        /// `box`, `pca:<log.csv>:<delta>`, `pcabox:<box.json>` or
        /// `poly:<file.json>`.
        #[arg(long, default_value = "box")]
        theta: ThetaSource,
    },
    /// Compare two solvers sample by sample.
    Bench {
        #[arg(long, default_value = "box")]
        theta: ThetaSource,
        /// `certified` (region witnesses) or `uniform:<M>[:<seed>]`.
        #[arg(long, default_value = "certified")]
        sampling: String,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Compare two existing cost files instead of running solvers.
        #[arg(long, requires = "tau_b")]
        tau_a: Option<PathBuf>,
        #[arg(long, requires = "tau_a")]
        tau_b: Option<PathBuf>,
    },
    /// Closed-loop quadrotor simulation.
    Sim {
        #[arg(long, value_enum)]
        trajectory: Option<TrajectoryChoice>,
        /// Run length [s]; defaults to the trajectory's length.
        #[arg(long)]
        duration: Option<f64>,
        /// Measurement noise standard deviation.
        #[arg(long)]
        noise: Option<f64>,
        /// Factor on the hover command the controller assumes.
        #[arg(long)]
        hover_scale: Option<f64>,
        /// Rate of the error-state log written for `pca` [Hz].
        #[arg(long, default_value_t = 20.0)]
        log_rate: f64,
    },
    /// Rotated bounding box of a logged error-state series.
    Pca {
        log: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        delta: f64,
        /// Monte-Carlo samples per volume estimate.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Partial,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let ctx = Context::new(&cli)?;
    match cli.command {
        Command::Certify { theta } => certify::run(&ctx, &theta),
        Command::Bench {
            theta,
            sampling,
            bins,
            tau_a,
            tau_b,
        } => bench::run(&ctx, &theta, &sampling, bins, tau_a.zip(tau_b)),
        Command::Sim {
            trajectory,
            duration,
            noise,
            hover_scale,
            log_rate,
        } => sim::run(
            &ctx,
            sim::Overrides {
                trajectory,
                duration,
                noise,
                hover_scale,
                log_rate,
            },
        ),
        Command::Pca {
            log,
            delta,
            samples,
        } => pca::run(&ctx, &log, delta, samples),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
