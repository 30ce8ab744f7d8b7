//! `demask` — reconstruct band-limited fields on the sphere from masked
//! (and optionally noisy) harmonic coefficients.
//!
//! Subcommands cover the full experiment pipeline: precomputing the
//! per-order mask operator blocks, running seeded end-to-end experiments
//! with error reports, spectral diagnostics of the operator, and small
//! utilities for mask coefficients and field synthesis.

mod config;
mod commands;
mod formats;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CliError, ConfigOverrides};

#[derive(Parser)]
#[command(
    name = "demask",
    version,
    about = "Masked-field reconstruction on the sphere",
    after_help = "Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration shared by all subcommands. Precedence: built-in
/// defaults, then `--config` file entries, then explicit flags.
#[derive(Args, Debug, Default, Clone)]
struct ConfigFlags {
    /// Path to a key=value configuration file (same keys as the flags).
    #[arg(long)]
    config: Option<String>,

    /// Input degree bound of the field.
    #[arg(long = "L")]
    l_max: Option<usize>,

    /// Mask expansion degree.
    #[arg(long = "K")]
    k_deg: Option<usize>,

    /// Output degree bound of the masked data (default: L + K).
    #[arg(long = "J")]
    j_max: Option<usize>,

    /// Inner mask latitude in degrees: the band |lat| <= a is fully masked.
    #[arg(long)]
    mask_a_deg: Option<f64>,

    /// Outer mask latitude in degrees: |lat| >= b is fully visible.
    #[arg(long)]
    mask_b_deg: Option<f64>,

    /// Noise-to-signal variance ratio.
    #[arg(long)]
    tau: Option<f64>,

    /// Random seed for field and noise realizations.
    #[arg(long)]
    seed: Option<u64>,

    /// Solver: "qr" or "regularized".
    #[arg(long)]
    method: Option<String>,

    /// Ridge strengths for the regularized grid search, comma separated.
    #[arg(long = "nu", value_delimiter = ',')]
    nu_grid: Option<Vec<f64>>,

    /// Power spectrum: "tapered" (built in) or a path to a spectrum file.
    #[arg(long)]
    spectrum: Option<String>,

    /// Keep nonzero monopole and dipole entries in the built-in spectrum.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    include_monopole_dipole: Option<bool>,

    /// Output directory.
    #[arg(long)]
    out: Option<String>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long)]
    workers: Option<usize>,

    /// Override the quadrature exactness of the masking grid
    /// (default: L + K + J).
    #[arg(long)]
    grid_exactness: Option<usize>,

    /// Size preset applied before other flags: "desk" (L=32, K=96,
    /// J=128) or "full" (L=100, K=900, J=1000).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Precompute and cache the per-order mask operator blocks.
    BuildOperator(ConfigFlags),
    /// Run a seeded experiment: synthesize, mask, reconstruct, report.
    Experiment(ConfigFlags),
    /// Report per-order singular values and condition numbers.
    Diagnose(ConfigFlags),
    /// Compute and write the zonal mask coefficients.
    MaskCoeffs(ConfigFlags),
    /// Sample a field realization and write its coefficients and samples.
    Synth(ConfigFlags),
}

/// Minimal logger forwarding library warnings to stderr, so numerical
/// caveats (e.g. insufficient quadrature exactness) are never silent.
struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("[{}] {}", record.level(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

fn main() -> ExitCode {
    let _ = log::set_logger(&LOGGER);
    log::set_max_level(log::LevelFilter::Warn);

    let cli = Cli::parse();
    let (flags, run): (
        &ConfigFlags,
        fn(&config::ExperimentConfig) -> Result<(), CliError>,
    ) = match &cli.command {
        Command::BuildOperator(f) => (f, commands::build_operator::run),
        Command::Experiment(f) => (f, commands::experiment::run),
        Command::Diagnose(f) => (f, commands::diagnose::run),
        Command::MaskCoeffs(f) => (f, commands::mask_coeffs::run),
        Command::Synth(f) => (f, commands::synth::run),
    };

    let result = config::resolve(&ConfigOverrides::from_flags(flags)).and_then(|cfg| {
        match cfg.workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("worker pool: {e}")))?
                .install(|| run(&cfg)),
            None => run(&cfg),
        }
    });

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
