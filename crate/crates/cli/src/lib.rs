//! The `batchlab` command line.
//!
//! Exit codes: 0 when a command succeeds and every check passes, 1 when a
//! check finds a violation or the run fails, 2 for usage and parameter
//! errors.

pub mod commands;
pub mod config;
pub mod model;
pub mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::output::{Format, Output, OUT_DIR_VAR};

pub const SEED_VAR: &str = "BATCHLAB_SEED";

/// Bad input from the user; exits with status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Whether every check of a command passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Violation,
}

#[derive(Parser, Debug)]
#[command(name = "batchlab", version, about = "Exact analysis, simulation and incentive calibration for shared-pool self-assignment")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: Format,
    /// Write the result here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed for every random stream.
    #[arg(long, global = true, env = SEED_VAR)]
    pub seed: Option<u64>,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log more (-v info, -vv debug); `RUST_LOG` also works.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generator, stationary distribution, relative values and metrics.
    Solve(commands::solve::SolveArgs),
    /// Optimality of batching and dominance of assigning one, over a grid.
    Verify(commands::verify::VerifyArgs),
    /// One shift, or independent replications with Monte Carlo estimates.
    Simulate(commands::simulate::SimulateArgs),
    /// Pathwise comparison of a profile with its assign-one counterpart.
    Couple(commands::couple::CoupleArgs),
    /// Expected bonuses and incentive strength of the treatments.
    Calibrate(commands::calibrate::CalibrateArgs),
    /// Sample paths whose realized strength is close to the expected one.
    SelectPaths(commands::select::SelectArgs),
    /// Label assignments as batched or not.
    Classify(commands::classify::ClassifyArgs),
    /// Run the session HTTP API.
    Serve(commands::serve::ServeArgs),
}

/// Shared inputs of every command.
pub struct Context {
    pub config: RunConfig,
    pub output: Output,
    seed: Option<u64>,
}

impl Context {
    /// Flag or environment, then the config file, then 0.
    pub fn seed(&self) -> u64 {
        self.seed.or(self.config.seed).unwrap_or(0)
    }

    pub fn horizon(&self, flag: Option<f64>, default: f64) -> f64 {
        flag.or(self.config.horizon).unwrap_or(default)
    }
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let config = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = Context {
        config,
        output: Output {
            format: cli.common.format,
            out: cli.common.out.clone(),
            out_dir: std::env::var_os(OUT_DIR_VAR)
                .filter(|d| !d.is_empty())
                .map(PathBuf::from),
        },
        seed: cli.common.seed,
    };
    match cli.command {
        Command::Solve(a) => commands::solve::run(&ctx, &a),
        Command::Verify(a) => commands::verify::run(&ctx, &a),
        Command::Simulate(a) => commands::simulate::run(&ctx, &a),
        Command::Couple(a) => commands::couple::run(&ctx, &a),
        Command::Calibrate(a) => commands::calibrate::run(&ctx, &a),
        Command::SelectPaths(a) => commands::select::run(&ctx, &a),
        Command::Classify(a) => commands::classify::run(&ctx, &a),
        Command::Serve(a) => commands::serve::run(&ctx, &a),
    }
}

/// 2 for anything the user can fix by changing the invocation or config.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>()
            || cause.is::<batchlab_server::ConfigError>()
            || cause.is::<toml::de::Error>()
        {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<batchlab::Error>() {
            use batchlab::Error as E;
            if matches!(
                e,
                E::InvalidParams(_) | E::InvalidProfile(_) | E::UnknownPath(_) | E::Invalid(_)
            ) {
                return 2;
            }
        }
    }
    1
}

pub fn init_logging(verbose: u8) {
    use tracing_subscriber::EnvFilter;
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .without_time()
        .try_init();
}

pub fn main_with(args: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    init_logging(cli.common.verbose);
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
