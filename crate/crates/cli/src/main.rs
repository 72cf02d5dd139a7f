//! `rieszgrad`: verification suite, weight constants, Poincaré constants,
//! PDE solves, single operators and parameter sweeps.
//!
//! Exit codes: 0 success, 1 numeric failure (a violated check in `verify`, a
//! solver that did not converge), 2 invalid input (configuration, arguments,
//! unreadable files).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    Core(#[from] rieszgrad::Error),
    #[error("emit: {0}")]
    Emit(String),
    /// A numeric check failed; the details are already printed.
    #[error("{0}")]
    Violation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use rieszgrad::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(..) => 2,
            CliError::Core(E::NotConverged { .. } | E::Breakdown(_) | E::ImaginaryResidue { .. }) => 1,
            CliError::Core(_) => 2,
            CliError::Emit(_) | CliError::Violation(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rieszgrad", version, about = "Weighted fractional calculus on periodic grids")]
struct Cli {
    /// Seed for every stochastic family.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "rieszgrad-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the identity and inequality suite; exits 1 on any violation.
    Verify {
        /// Smaller grids and sample families.
        #[arg(long)]
        quick: bool,
    },
    /// A_p, A_{p,q} and two-weight constants of a weight.
    Weights(WeightsArgs),
    /// Poincaré constant of a domain.
    Poincare(PoincareArgs),
    /// Solve a problem file.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Apply one fractional operator to a field file.
    Op(OpArgs),
    /// Evaluate one quantity over a grid of (s, p, α).
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum FamilyArg {
    Unit,
    Power,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
enum LayoutArg {
    Dyadic,
    Centered,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct WeightsArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Power)]
    family: FamilyArg,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Also report [w]_{p,q}.
    #[arg(long)]
    q: Option<f64>,
    /// With --q: the Sawyer–Wheeden constant of order s.
    #[arg(long)]
    s: Option<f64>,
    /// With --s: power of the left weight v (defaults to w).
    #[arg(long, allow_hyphen_values = true)]
    v_alpha: Option<f64>,
    /// Finest cube level.
    #[arg(long, default_value_t = 8)]
    levels: usize,
    #[arg(long, default_value_t = 0)]
    min_level: usize,
    #[arg(long, value_enum, default_value_t = LayoutArg::Dyadic)]
    layout: LayoutArg,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 4096)]
    points: usize,
    #[arg(long, default_value_t = 2.0)]
    length: f64,
    /// Singular point (power family), comma separated; origin by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Target set as JSON, e.g. {"kind":"segment","a":[-0.5,0],"b":[0.5,0]}.
    #[arg(long)]
    set: Option<String>,
    /// Declared dimension of the target set.
    #[arg(long, default_value_t = 0)]
    k: usize,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct PoincareArgs {
    /// JSON file with grid, omega, s, p and coefficient; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Size of the comparison family of bumps supported in Ω.
    #[arg(long, default_value_t = 16)]
    family: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
pub enum OpName {
    #[value(name = "grad")]
    Grad,
    #[value(name = "div")]
    Div,
    #[value(name = "riesz")]
    Riesz,
    #[value(name = "bessel")]
    Bessel,
    #[value(name = "flap")]
    Flap,
    #[value(name = "rt")]
    Rt,
    #[value(name = "Ts")]
    Ts,
    #[value(name = "Gs")]
    Gs,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct OpArgs {
    #[arg(value_enum)]
    name: OpName,
    #[arg(long)]
    input: PathBuf,
    /// Output file name inside --out.
    #[arg(long)]
    output: String,
    /// Order of grad, div, Ts, Gs.
    #[arg(long)]
    s: Option<f64>,
    /// Order of riesz, bessel, flap.
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    /// Component of rt.
    #[arg(long, default_value_t = 0)]
    j: usize,
    /// Also write a CSV copy of each output component.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepWhat {
    /// [w]_p of |x|^α.
    Ap,
    /// Poincaré constant of the interval (-1/4, 1/4) with w = |x|^α.
    Poincare,
    /// X/H norm equivalence ratios with w = |x|^α.
    Equivalence,
    /// Manufactured solve with w = |x|^α.
    Solve,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    what: SweepWhat,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    s: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0", allow_hyphen_values = true)]
    alpha: Vec<f64>,
    #[arg(long, default_value_t = 256)]
    points: usize,
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("RIESZGRAD_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("RIESZGRAD_THREADS: `{v}` is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("RIESZGRAD_THREADS: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Verify { quick } => commands::verify(&cli.out, quick, cli.seed),
        Command::Weights(a) => commands::weights(&cli.out, &a, cli.seed),
        Command::Poincare(a) => commands::poincare(&cli.out, &a, cli.seed),
        Command::Solve { config } => commands::solve(&cli.out, &config, cli.seed),
        Command::Op(a) => commands::op(&cli.out, &a, cli.seed),
        Command::Sweep(a) => commands::sweep(&cli.out, &a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rieszgrad: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
