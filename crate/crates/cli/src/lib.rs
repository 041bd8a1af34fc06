//! Command-line driver: single solves with convergence traces, backhaul
//! sweeps against a one-shot heuristic, and brute-force cross-checks.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig, Mode};
pub use run::{run_oracle_check, run_solve, run_sweep, RunReport};

#[derive(Debug, Parser)]
#[command(name = "comp-dbrb", version, about = "Globally optimal CoMP beamforming and link selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance per seed and record the bound trace.
    Solve(RunArgs),
    /// Optimal versus heuristic sum rate over a grid of backhaul capacities.
    Sweep(RunArgs),
    /// Compare the solver against brute-force enumeration on tiny instances.
    OracleCheck(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON config; mode defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run this seed only.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 runs serially and reproduces output bit for bit.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub epsilon_rel: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl Command {
    pub fn mode(&self) -> Mode {
        match self {
            Command::Solve(_) => Mode::Solve,
            Command::Sweep(_) => Mode::Sweep,
            Command::OracleCheck(_) => Mode::OracleCheck,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a) | Command::Sweep(a) | Command::OracleCheck(a) => a,
        }
    }
}

/// Loads the config (or the mode defaults) and applies command-line overrides.
pub fn resolve_config(mode: Mode, args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::defaults(mode),
    };
    if cfg.mode != mode {
        return Err(ConfigError::ModeConflict { file: cfg.mode, requested: mode });
    }
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(e) = args.epsilon_rel {
        cfg.eps_rel = e;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iter = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let mode = cli.command.mode();
    let outcome = resolve_config(mode, cli.command.args()).map_err(anyhow::Error::from).and_then(|cfg| match mode {
        Mode::Solve => run_solve(&cfg),
        Mode::Sweep => run_sweep(&cfg),
        Mode::OracleCheck => run_oracle_check(&cfg),
    });
    match outcome {
        Ok(report) => {
            for f in &report.files {
                log::info!("wrote {}", f.display());
            }
            report.exit_code
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            run::EXIT_OTHER
        }
    }
}
