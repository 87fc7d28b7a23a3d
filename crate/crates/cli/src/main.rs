//! `pilotbox`: dispersion tables, single runs, ε sweeps, calibration and
//! post-run analysis.
//!
//! Exit codes: 0 on success, 1 when a simulation fails, 2 on usage or
//! configuration errors.

mod commands;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use params::ParamArgs;

/// Environment variable that overrides the default output directory.
pub const OUTPUT_ENV: &str = "PILOTBOX_OUTPUT";

#[derive(Parser, Debug)]
#[command(name = "pilotbox", version, about = "Walking-particle pilot-wave simulations in a box")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the normalized RS dispersion and, optionally, the
    /// gravity-capillary relations it mirrors.
    Dispersion(DispersionArgs),
    /// Run one simulation.
    Simulate(SimulateArgs),
    /// Run an ε sweep.
    Sweep(SweepArgs),
    /// Search γ₀ × b for the target mode at one ε.
    Calibrate(CalibrateArgs),
    /// Derive peaks, phase space, energy levels and a summary from a run or
    /// sweep directory.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
struct DispersionArgs {
    /// Largest wavenumber in the table.
    #[arg(long)]
    k_max: f64,
    /// Number of rows; k runs over (0, k_max] in equal steps.
    #[arg(long, default_value_t = 100)]
    k_points: usize,
    /// Normalized potential for the RS column.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Hydrodynamic parameters, e.g. `σ/ρ=1,g=1,H=0.1`.
    #[arg(long)]
    hydro: Option<String>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Times at which to store the wave field, comma separated.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<f64>,
    #[arg(long, env = OUTPUT_ENV, default_value = "pilotbox-run")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long)]
    eps_min: f64,
    #[arg(long)]
    eps_max: f64,
    #[arg(long)]
    points: usize,
    /// Concurrent simulations.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, env = OUTPUT_ENV, default_value = "pilotbox-sweep")]
    output: PathBuf,
    /// Reuse completed runs already in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Forcing amplitudes to try, comma separated.
    #[arg(long = "gamma0-grid", value_delimiter = ',')]
    gamma0_grid: Vec<f64>,
    /// Damping coefficients to try, comma separated.
    #[arg(long = "damping-grid", value_delimiter = ',')]
    damping_grid: Vec<f64>,
    /// Potential at which the target mode is sought.
    #[arg(long, default_value_t = 2.73)]
    target_epsilon: f64,
    /// Wanted number of interior PDF peaks.
    #[arg(long, default_value_t = 5)]
    target_peaks: usize,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, env = OUTPUT_ENV, default_value = "pilotbox-calibration")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Run or sweep directory.
    input: PathBuf,
    /// Where to write the analysis; defaults to the input directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Dispersion(a) => commands::dispersion(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Analyze(a) => commands::analyze(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
