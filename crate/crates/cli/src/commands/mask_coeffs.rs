//! `mask-coeffs`: compute the zonal expansion coefficients of the
//! configured mask and write them with the truncation's extrema.

use demask_core::mask::{mask_coeffs, mask_extrema};

use crate::config::{CliError, ExperimentConfig};
use crate::formats;

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let spec = super::mask_spec(cfg)?;
    let coeffs = mask_coeffs(&spec);

    let mut text = format!("# K={}\n", coeffs.degree());
    for (k, &w) in coeffs.w().iter().enumerate() {
        text.push_str(&format!("{k} {}\n", formats::fmt_f64(w)));
    }
    formats::ensure_dir(&cfg.out)?;
    let path = cfg.out.join("mask_coeffs.txt");
    formats::write_text(&path, &text)?;

    let (lo, hi) = mask_extrema(&coeffs, super::extrema_samples(cfg.k_deg));
    formats::emit(&format!(
        "mask band {:.6}-{:.6} deg, expansion degree {}",
        cfg.mask_a_deg,
        cfg.mask_b_deg,
        coeffs.degree()
    ));
    formats::emit(&format!(
        "truncated mask extrema: min {} max {}",
        formats::fmt_f64(lo),
        formats::fmt_f64(hi)
    ));
    formats::emit(&format!("wrote {}", path.display()));
    Ok(())
}
