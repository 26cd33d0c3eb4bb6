use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod input;

use input::CliError;

/// Thick control sets, control-cost constants and HUM null controls for the
/// heat equation.
#[derive(Debug, Parser)]
#[command(name = "heatctl", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args, serde::Serialize)]
pub struct GlobalArgs {
    /// Seed for every randomised step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the artifact here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Override of the Logvinenko-Sereda constant K1.
    #[arg(long = "K1", global = true)]
    #[serde(rename = "K1")]
    pub k1: Option<f64>,
    /// Override of raster resolutions (per axis).
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Thickness certificate of a box-union set.
    Thickness(ThicknessArgs),
    /// Constant chain and cost bounds.
    Constants(ConstantsArgs),
    /// Check the LS inequality on one instance or the built-in corpus.
    LsVerify(LsVerifyArgs),
    /// Adversarial search for the worst LS ratio.
    LsSearch(LsSearchArgs),
    /// Minimal-norm null control via the observability Gramian.
    Hum(HumArgs),
    /// Observability ratio of one datum.
    Observability(ObservabilityArgs),
    /// Divergence table for a non-thick family.
    Counterexample(CounterexampleArgs),
    /// Cost sweep over a parameter grid, written as CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Auto,
    Exact,
    Raster,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct ThicknessArgs {
    /// Set description (JSON).
    #[arg(long)]
    pub set: PathBuf,
    /// Box sides; one value is repeated over every axis.
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    pub a: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    /// Also decide `(gamma, a)`-thickness for this gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Lower corner of the translate window (non-periodic sets).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub window_lo: Option<Vec<f64>>,
    /// Upper corner of the translate window (non-periodic sets).
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub window_hi: Option<Vec<f64>>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct ConstantsArgs {
    /// Parameters as JSON; replaces the individual flags.
    #[arg(long, conflicts_with_all = ["d", "gamma", "a", "domain", "l"])]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub a: Option<Vec<f64>>,
    #[arg(long)]
    pub domain: Option<heatctl_core::DomainKind>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<f64>,
    /// Horizons at which the bounds are evaluated.
    #[arg(long = "T", num_args = 1.., value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0])]
    #[serde(rename = "T")]
    pub t: Vec<f64>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct LsVerifyArgs {
    /// Instance JSON with `f`, `set`, `a` and optional `gamma`.
    #[arg(long, required_unless_present = "corpus", conflicts_with = "corpus")]
    pub instance: Option<PathBuf>,
    /// Run the built-in seeded corpus instead.
    #[arg(long)]
    pub corpus: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Auto,
    Eigensolve,
    CoordinateAscent,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct LsSearchArgs {
    /// Control set (JSON).
    #[arg(long)]
    pub set: PathBuf,
    #[arg(long)]
    pub bc: heatctl_core::BoundaryCondition,
    #[arg(long = "L", default_value_t = 1.0)]
    #[serde(rename = "L")]
    pub l: f64,
    /// Spectrum: every mode with eigenvalue up to this value.
    #[arg(long)]
    pub e_max: f64,
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// Box sides for the bound column; omitted means no bound.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    pub a: Option<Vec<f64>>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct HumArgs {
    /// Problem JSON.
    #[arg(long)]
    pub problem: PathBuf,
    /// Trajectory CSV with columns t, u_norm, v_norm.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct ObservabilityArgs {
    /// Problem JSON.
    #[arg(long)]
    pub problem: PathBuf,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct CounterexampleArgs {
    /// Family JSON; the built-in one-dimensional family when omitted.
    #[arg(long)]
    pub family: Option<PathBuf>,
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6])]
    pub k: Vec<u32>,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(rename = "T")]
    pub t: f64,
    #[arg(long, default_value_t = heatctl_core::counterexample::DEFAULT_TIME_PANELS)]
    pub panels: usize,
    /// Also write the table as CSV.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct SweepArgs {
    /// Sweep spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Thickness(a) => commands::thickness(g, a),
        Command::Constants(a) => commands::constants(g, a),
        Command::LsVerify(a) => commands::ls_verify(g, a),
        Command::LsSearch(a) => commands::ls_search(g, a),
        Command::Hum(a) => commands::hum(g, a),
        Command::Observability(a) => commands::observability(g, a),
        Command::Counterexample(a) => commands::counterexample(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
