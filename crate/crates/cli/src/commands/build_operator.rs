//! `build-operator`: precompute the per-order mask operator blocks and
//! cache them as binary files guarded by a manifest.

use std::fs;

use rayon::prelude::*;

use demask_core::mask::{mask_coeffs, MaskCoeffs};
use demask_core::operator::{build_axial_block, MaskOperatorBlock};

use crate::config::{CliError, ExperimentConfig};
use crate::formats;

/// How the cache was obtained, for reporting.
pub struct CacheOutcome {
    pub blocks: Vec<MaskOperatorBlock>,
    pub mask: MaskCoeffs,
    /// Orders whose blocks were computed this run (the rest came from the
    /// cache).
    pub built_orders: Vec<usize>,
}

/// Ensures the operator cache under the output directory is complete and
/// current, building whatever is missing. Returns the blocks ordered by
/// `m` together with the mask coefficients they encode.
///
/// The cache is trusted only when its manifest — degree bounds, mask
/// geometry, and a hash of the mask coefficients — matches the current
/// configuration exactly; any mismatch forces a rebuild.
pub fn ensure(cfg: &ExperimentConfig) -> Result<CacheOutcome, CliError> {
    let spec = super::mask_spec(cfg)?;
    let mask = mask_coeffs(&spec);
    let digest = formats::mask_digest(mask.w());
    let manifest = formats::manifest_content(
        cfg.l_max,
        cfg.k_deg,
        cfg.j_max,
        cfg.mask_a_deg,
        cfg.mask_b_deg,
        &digest,
    );

    let dir = super::operator_dir(cfg);
    formats::ensure_dir(&dir)?;
    let manifest_path = dir.join("manifest.txt");
    let manifest_ok = fs::read_to_string(&manifest_path)
        .map(|text| text == manifest)
        .unwrap_or(false);

    // Load cached blocks where the manifest vouches for them; anything
    // unreadable or mis-shaped is rebuilt rather than trusted.
    let mut blocks: Vec<Option<MaskOperatorBlock>> = vec![None; cfg.l_max + 1];
    if manifest_ok {
        for (m, slot) in blocks.iter_mut().enumerate() {
            let path = super::block_path(&dir, m);
            if let Ok(block) = formats::read_block(&path) {
                if block.m() == m && block.l_max() == cfg.l_max && block.j_max() == cfg.j_max {
                    *slot = Some(block);
                }
            }
        }
    }

    let missing: Vec<usize> = blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.is_none())
        .map(|(m, _)| m)
        .collect();
    if !missing.is_empty() {
        // Invalidate the manifest before touching block files so a crash
        // mid-build cannot leave a stale cache that still claims validity.
        if manifest_ok {
            fs::remove_file(&manifest_path)
                .map_err(|e| CliError::io(&manifest_path.display().to_string(), e))?;
        }
        let fresh: Vec<(usize, MaskOperatorBlock)> = missing
            .par_iter()
            .map(|&m| {
                build_axial_block(m, &mask, cfg.l_max, cfg.j_max)
                    .map(|b| (m, b))
                    .map_err(|e| CliError::numerical("operator assembly", e))
            })
            .collect::<Result<_, _>>()?;
        for (m, block) in fresh {
            formats::write_block(&super::block_path(&dir, m), &block)?;
            blocks[m] = Some(block);
        }
        formats::write_text(&manifest_path, &manifest)?;
    }

    Ok(CacheOutcome {
        blocks: blocks
            .into_iter()
            .map(|b| b.expect("all orders filled"))
            .collect(),
        mask,
        built_orders: missing,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let outcome = ensure(cfg)?;
    for block in &outcome.blocks {
        let state = if outcome.built_orders.contains(&block.m()) {
            "built"
        } else {
            "cached"
        };
        formats::emit(&format!(
            "block m={} rows={} cols={} {state}",
            block.m(),
            block.rows(),
            block.cols()
        ));
    }
    formats::emit(&format!(
        "operator cache: {} blocks ({} built, {} reused) in {}",
        outcome.blocks.len(),
        outcome.built_orders.len(),
        outcome.blocks.len() - outcome.built_orders.len(),
        super::operator_dir(cfg).display()
    ));
    Ok(())
}
