//! Command-line runner for the circular Riesz gas laboratory.
//!
//! Exit codes: 0 on success, 1 when a check fails or a numerical run breaks
//! down, 2 on usage, configuration or I/O errors.
// negated float comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::Overrides;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Io(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numerical(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl From<riesz_core::Error> for CliError {
    fn from(e: riesz_core::Error) -> Self {
        match e {
            riesz_core::Error::InvalidParams { .. } | riesz_core::Error::InvalidArgument(_) | riesz_core::Error::WindowOverlap => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) => 1,
            _ => 2,
        }
    }
}

/// Outcome of a command that did not error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    CheckFailed,
}

#[derive(Debug, Parser)]
#[command(name = "riesz", version, about = "Circular Riesz gas laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Metropolis chains and write energies, diagnostics and snapshots.
    Sample(RunArgs),
    /// Run the oracle check suite and print a pass/fail table.
    Verify(VerifyArgs),
    /// Tabulate g, g_n and |g_n − g| along the first axis.
    PotentialTable(TableArgs),
    /// Evaluate DLR and GNZ residuals on the quadrature grid (d = 1, n ≤ 3).
    DlrTest(RunArgs),
    /// Window-count histogram and swap ratios from a swap-enhanced chain.
    Rigidity(RunArgs),
    /// Number fluctuations in centred windows.
    Fluctuation(RunArgs),
    /// log Z_n / n against the partition-function bracket (d = 1).
    Freeenergy(FreeEnergyArgs),
    /// Integral-compensated sums S_p for increasing p.
    ProbeCompensator(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Total Metropolis steps, burn-in included.
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long)]
    pub thin: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// plain, dlr or swap.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Fixed proposal step; disables burn-in tuning.
    #[arg(long)]
    pub step_size: Option<f64>,
    /// Independent chains, one RNG stream each.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Volume of the centred window Δ.
    #[arg(long)]
    pub window_volume: Option<f64>,
    /// Swap shift along the first axis; repeatable.
    #[arg(long = "shift", allow_negative_numbers = true)]
    pub shifts: Vec<f64>,
    /// Output directory (overrides RIESZ_OUTPUT_DIR and the config).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub points_per_axis: Option<usize>,
}

impl RunArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            d: self.d,
            s: self.s,
            n: self.n,
            beta: self.beta,
            steps: self.steps,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            schedule: self.schedule.clone(),
            step_size: self.step_size,
            chains: self.chains,
            window_volume: self.window_volume,
            shifts: (!self.shifts.is_empty()).then(|| self.shifts.clone()),
            output: self.output.clone(),
            points_per_axis: self.points_per_axis,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long)]
    pub s: f64,
    /// Smaller particle numbers and Monte Carlo budgets.
    #[arg(long)]
    pub quick: bool,
    /// Seed of the Monte Carlo checks.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write verify.csv here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub n: usize,
    /// Evaluation points on (0, L/2].
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Lattice truncation radius K; defaults to the certified choice.
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FreeEnergyArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Particle numbers to check; defaults to model.n.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Vec<usize>,
    /// β' points of the thermodynamic-integration grid.
    #[arg(long, default_value_t = 21)]
    pub ti_points: usize,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli.command) {
        Ok(Status::Success) => 0,
        Ok(Status::CheckFailed) => 1,
        Err(e) => {
            eprintln!("riesz: {e}");
            e.exit_code()
        }
    }
}
