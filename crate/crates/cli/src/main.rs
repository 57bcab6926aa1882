mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Spectral gaps of stochastic energy exchange models.
#[derive(Debug, Parser)]
#[command(name = "gapforge", version)]
pub struct Cli {
    /// Worker threads for parallel work (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one spectral gap.
    Gap(GapArgs),
    /// Compute gaps over a parameter grid and write CSV rows.
    Sweep(SweepArgs),
    /// Three-site constants κ_m (nearest) and κ̃_m (long range).
    Kappa(KappaArgs),
    /// Two-site constant of a kernel.
    TwoSite(TwoSiteArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
    /// Simulate a trajectory and dump snapshots as CSV.
    Simulate(SimulateArgs),
    /// Print the moving-path site sequence for sites i < j.
    Path(PathArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Galerkin,
    Mc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Auto,
    F64,
    Extended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Appendix,
    Theorems,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, env = "GAPFORGE_SEED")]
    pub seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[command(flatten)]
    pub common: Common,
    /// star, kmp, gg3, gg2 or stick.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Mean energy per site.
    #[arg(long = "E", alias = "e")]
    pub e: Option<f64>,
    /// Number of sites.
    #[arg(long = "N", alias = "n")]
    pub n: Option<usize>,
    /// nearest (nn) or long-range (lr).
    #[arg(long)]
    pub topology: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Galerkin polynomial degree.
    #[arg(long)]
    pub degree: Option<usize>,
    /// Monte Carlo events.
    #[arg(long)]
    pub events: Option<u64>,
    #[arg(long, value_enum, default_value = "auto")]
    pub precision: PrecisionArg,
    /// Print the full JSON record instead of the bare value.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub m: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long = "E", alias = "e", value_delimiter = ',')]
    pub e: Vec<f64>,
    #[arg(long = "N", alias = "n", value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub topology: Vec<String>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub events: Option<u64>,
    /// Append rows to `<dir>/sweep.csv` and skip rows already present.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 8)]
    pub degree: usize,
    /// Truncation of the tridiagonal forms for the lower bound (m = 1).
    #[arg(long, default_value_t = 200)]
    pub n_max: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TwoSiteArgs {
    /// gg2, gg3, stick or star.
    #[arg(long)]
    pub model: String,
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 12)]
    pub degree: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, env = "GAPFORGE_SEED")]
    pub seed: Option<u64>,
    /// JSON report (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Summary CSV of the theorem checks.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Monte Carlo samples for the indicator quotient.
    #[arg(long)]
    pub mc_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub m: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "E", alias = "e")]
    pub e: Option<f64>,
    #[arg(long = "N", alias = "n")]
    pub n: Option<usize>,
    #[arg(long)]
    pub topology: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub stride: f64,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[arg(long)]
    pub i: usize,
    #[arg(long)]
    pub j: usize,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

/// Exit codes.
pub mod exit {
    pub const CONFIG: u8 = 1;
    pub const NUMERIC: u8 = 2;
    pub const VERIFY: u8 = 3;
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(j) = cli.jobs
        && let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(exit::CONFIG);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
