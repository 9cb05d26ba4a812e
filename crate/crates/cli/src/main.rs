//! `qmoment` — scenario-driven front end for the spectral control toolkit.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error,
//! 3 non-convergence.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::ScenarioConfig;

/// Error carrying the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    /// Malformed configuration or input data → exit 2.
    Input(String),
    /// An invariant or verification check failed → exit 1.
    Verification(String),
    /// An iterative solver ran out of budget → exit 3.
    NoConvergence(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        Self::Input(msg.into())
    }

    fn code(&self) -> u8 {
        match self {
            Self::Verification(_) => 1,
            Self::Input(_) => 2,
            Self::NoConvergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Input(m) | Self::Verification(m) | Self::NoConvergence(m) => m,
        }
    }
}

impl From<qmoment_core::Error> for CliError {
    fn from(e: qmoment_core::Error) -> Self {
        match &e {
            qmoment_core::Error::NoConvergence { .. }
            | qmoment_core::Error::NoContraction { .. } => Self::NoConvergence(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ControlMode {
    Linear,
    Nonlinear,
}

#[derive(Parser)]
#[command(name = "qmoment", version, about)]
struct Cli {
    /// Scenario file (TOML primary, JSON accepted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker-pool width for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also run at halved and quartered dt and emit a self-convergence table.
    #[arg(long, global = true)]
    dt_halve: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Propagate the scenario and emit trajectory + conservation artifacts.
    Simulate,
    /// Solve a trigonometric moment problem read from a targets CSV.
    SolveMoment { targets: PathBuf },
    /// Synthesize a control for endpoint data read from a JSON file.
    Control {
        #[arg(value_enum)]
        mode: ControlMode,
        endpoints: PathBuf,
    },
    /// Run the invariant suite and report pass/fail per check.
    Verify,
    /// Run the configured parameter sweeps and emit tables + summary.
    Sweep,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // Best effort: the pool may already be initialized in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::input("--config is required"))?;
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.validate()?;
    let out_dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("qmoment-out"));
    match &cli.cmd {
        Cmd::Simulate => commands::simulate(&cfg, &out_dir, cli.dt_halve),
        Cmd::SolveMoment { targets } => commands::solve_moment(&cfg, &out_dir, targets),
        Cmd::Control { mode, endpoints } => {
            commands::control(&cfg, &out_dir, *mode, endpoints)
        }
        Cmd::Verify => commands::verify(&cfg, &out_dir),
        Cmd::Sweep => commands::sweep(&cfg, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
