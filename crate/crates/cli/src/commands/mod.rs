//! Subcommand implementations. Each submodule exposes
//! `run(&ExperimentConfig) -> Result<(), CliError>`; shared configuration
//! plumbing lives here.

pub mod build_operator;
pub mod diagnose;
pub mod experiment;
pub mod mask_coeffs;
pub mod synth;

use std::path::{Path, PathBuf};

use demask_core::field::PowerSpectrum;
use demask_core::mask::AxialMaskSpec;

use crate::config::{CliError, ExperimentConfig, SpectrumSource};
use crate::formats;

/// The analytic mask geometry of the run (latitudes resolved to radians,
/// expansion degree `K`).
pub fn mask_spec(cfg: &ExperimentConfig) -> Result<AxialMaskSpec, CliError> {
    AxialMaskSpec::new(
        cfg.mask_a_deg.to_radians(),
        cfg.mask_b_deg.to_radians(),
        cfg.k_deg,
    )
    .map_err(|e| CliError::config("mask geometry", e))
}

/// The signal power spectrum: the built-in taper, or a spectrum file
/// covering degrees `0..=L`.
pub fn signal_spectrum(cfg: &ExperimentConfig) -> Result<PowerSpectrum, CliError> {
    match &cfg.spectrum {
        SpectrumSource::Tapered => Ok(PowerSpectrum::tapered(
            cfg.l_max,
            cfg.include_monopole_dipole,
        )),
        SpectrumSource::File(path) => {
            let values = formats::read_spectrum(path, cfg.l_max)?;
            PowerSpectrum::from_values(values).map_err(|e| CliError::config("spectrum file", e))
        }
    }
}

/// Directory holding the operator block cache for this output directory.
pub fn operator_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join("operator")
}

/// Path of the order-`m` block file inside a cache directory.
pub fn block_path(dir: &Path, m: usize) -> PathBuf {
    dir.join(format!("block_m{m:03}.bin"))
}

/// Sample count for truncated-mask extrema scans: comfortably above the
/// `4 * degree` resolution floor, never tiny.
pub fn extrema_samples(degree: usize) -> usize {
    (8 * degree).max(4096)
}
