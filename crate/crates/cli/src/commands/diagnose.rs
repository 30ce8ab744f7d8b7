//! `diagnose`: per-order singular values and condition numbers of the
//! operator blocks, with the spectral upper bound checked against the
//! truncated mask's maximum.

use rayon::prelude::*;

use demask_core::mask::mask_extrema;
use demask_core::operator::singular_values;

use crate::config::{CliError, ExperimentConfig};
use crate::formats;

use super::build_operator;

/// Slack allowed on the `sigma_max <= v_max` bound: the singular values
/// and the mask extremum are both computed in floating point.
const BOUND_SLACK: f64 = 1e-8;

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let cache = build_operator::ensure(cfg)?;

    // Largest truncated-mask value over [-1, 1]; every block's largest
    // singular value must stay below it.
    let (v_min, v_max) = mask_extrema(&cache.mask, super::extrema_samples(cfg.k_deg));

    let spectra: Vec<(usize, f64, f64)> = cache
        .blocks
        .par_iter()
        .map(|block| {
            let sv = singular_values(block)
                .map_err(|e| CliError::numerical("singular values", e))?;
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &s in &sv {
                lo = lo.min(s);
                hi = hi.max(s);
            }
            Ok((block.m(), hi, lo))
        })
        .collect::<Result<_, CliError>>()?;

    let mut csv = String::from("m,sigma_max,sigma_min,condition\n");
    let mut worst_sigma = 0.0f64;
    let mut worst_condition = (0usize, 0.0f64);
    for &(m, hi, lo) in &spectra {
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        csv.push_str(&format!(
            "{m},{},{},{}\n",
            formats::fmt_f64(hi),
            formats::fmt_f64(lo),
            formats::fmt_f64(condition)
        ));
        worst_sigma = worst_sigma.max(hi);
        if condition > worst_condition.1 {
            worst_condition = (m, condition);
        }
    }

    formats::ensure_dir(&cfg.out)?;
    formats::write_text(&cfg.out.join("sigma.csv"), &csv)?;

    formats::emit(&format!(
        "mask extrema: min {} max {}",
        formats::fmt_f64(v_min),
        formats::fmt_f64(v_max)
    ));
    formats::emit(&format!(
        "largest condition number {} at m={}",
        formats::fmt_f64(worst_condition.1),
        worst_condition.0
    ));
    let ok = worst_sigma <= v_max + BOUND_SLACK;
    formats::emit(&format!(
        "spectral bound check: {} (sigma_max {} vs mask max {} + {BOUND_SLACK:e})",
        if ok { "PASS" } else { "FAIL" },
        formats::fmt_f64(worst_sigma),
        formats::fmt_f64(v_max)
    ));
    formats::emit(&format!("wrote {}", cfg.out.join("sigma.csv").display()));
    if ok {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "operator spectrum violates the mask bound: sigma_max {} > {}",
            formats::fmt_f64(worst_sigma),
            formats::fmt_f64(v_max + BOUND_SLACK)
        )))
    }
}
