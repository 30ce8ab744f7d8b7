//! Error functionals for reconstructed fields: quadrature-weighted RMS
//! error, per-region (masked / visible) errors with relative variants,
//! and the order-folded coefficient-space squared error.
//!
//! All field-domain sums use the grid's quadrature weights, so they
//! approximate the same sphere integrals an equal-area pixelization
//! would, without requiring one.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use core::f64::consts::PI;

use crate::error::Error;
use crate::harmonics::{FieldSamples, HarmonicCoeffs, SphereGrid};
use crate::mask::{mask_value, AxialMaskSpec};

/// Quadrature-weighted L² distance between two sample sets on `grid`:
/// `sqrt(sum_i w_i |recon_i - truth_i|^2)`, the discrete analogue of the
/// sphere-integral RMS error.
pub fn rms_error(
    recon: &FieldSamples,
    truth: &FieldSamples,
    grid: &SphereGrid,
) -> Result<f64, Error> {
    check_shapes(recon, truth, grid)?;
    let mut sum = 0.0;
    for t in 0..grid.n_theta() {
        let w = grid.quadrature_weight(t);
        let mut row = 0.0;
        for (&r, &a) in recon.row(t).iter().zip(truth.row(t)) {
            let d = r - a;
            row += d * d;
        }
        sum += w * row;
    }
    Ok(sum.sqrt())
}

fn check_shapes(
    recon: &FieldSamples,
    truth: &FieldSamples,
    grid: &SphereGrid,
) -> Result<(), Error> {
    let ok = recon.n_theta() == grid.n_theta()
        && truth.n_theta() == grid.n_theta()
        && recon.n_phi() == grid.n_phi()
        && truth.n_phi() == grid.n_phi();
    if ok {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(
            "sample sets must match the grid shape",
        ))
    }
}

/// Splits a grid into the fully masked region R0 (`v = 0` under the exact
/// analytic mask, not its truncation) and the at-least-partially visible
/// region R1 (`v > 0`). For an axial mask membership is constant along
/// each latitude row.
#[derive(Debug, Clone)]
pub struct RegionPartition {
    row_visible: Vec<bool>,
    row_weight: Vec<f64>,
    n_phi: usize,
    counts: (usize, usize),
    weights: (f64, f64),
}

impl RegionPartition {
    pub fn from_axial(grid: &SphereGrid, spec: &AxialMaskSpec) -> Self {
        let n_phi = grid.n_phi();
        let mut row_visible = Vec::with_capacity(grid.n_theta());
        let mut row_weight = Vec::with_capacity(grid.n_theta());
        let mut counts = (0usize, 0usize);
        let mut weights = (0.0f64, 0.0f64);
        for t in 0..grid.n_theta() {
            let visible = mask_value(spec, grid.node(t)) > 0.0;
            let w = grid.quadrature_weight(t);
            row_visible.push(visible);
            row_weight.push(w);
            if visible {
                counts.1 += n_phi;
                weights.1 += w * n_phi as f64;
            } else {
                counts.0 += n_phi;
                weights.0 += w * n_phi as f64;
            }
        }
        Self {
            row_visible,
            row_weight,
            n_phi,
            counts,
            weights,
        }
    }

    /// Point counts `(N0, N1)` of the masked and visible regions.
    pub fn counts(&self) -> (usize, usize) {
        self.counts
    }

    /// Total quadrature weights `(W0, W1)`; they sum to `4 pi`.
    pub fn weights(&self) -> (f64, f64) {
        self.weights
    }

    pub fn n_theta(&self) -> usize {
        self.row_visible.len()
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }
}

/// Per-region weighted RMS errors and relative errors:
/// `(rms0, rel0, rms1, rel1)`, where region `j` has
/// `rms_j = sqrt((4 pi / W_j) sum_{i in Rj} w_i |recon_i - truth_i|^2)`
/// and `rel_j` divides by the identically weighted norm of `truth`.
///
/// The `4 pi / W_j` normalization makes each region's measure look like
/// the full sphere, matching an equal-area mean; it cancels in `rel_j`.
/// Fails when either region contains no grid points.
pub fn region_errors(
    recon: &FieldSamples,
    truth: &FieldSamples,
    partition: &RegionPartition,
) -> Result<(f64, f64, f64, f64), Error> {
    if recon.n_theta() != partition.n_theta()
        || truth.n_theta() != partition.n_theta()
        || recon.n_phi() != partition.n_phi()
        || truth.n_phi() != partition.n_phi()
    {
        return Err(Error::ShapeMismatch(
            "sample sets must match the partition shape",
        ));
    }
    if partition.counts.0 == 0 || partition.counts.1 == 0 {
        return Err(Error::Empty("both mask regions need at least one grid point"));
    }
    // Weighted sums of |diff|^2 and |truth|^2 per region.
    let mut err = (0.0f64, 0.0f64);
    let mut norm = (0.0f64, 0.0f64);
    for t in 0..partition.n_theta() {
        let w = partition.row_weight[t];
        let mut row_err = 0.0;
        let mut row_norm = 0.0;
        for (&r, &a) in recon.row(t).iter().zip(truth.row(t)) {
            let d = r - a;
            row_err += d * d;
            row_norm += a * a;
        }
        if partition.row_visible[t] {
            err.1 += w * row_err;
            norm.1 += w * row_norm;
        } else {
            err.0 += w * row_err;
            norm.0 += w * row_norm;
        }
    }
    let scale0 = 4.0 * PI / partition.weights.0;
    let scale1 = 4.0 * PI / partition.weights.1;
    let rms0 = (scale0 * err.0).sqrt();
    let rms1 = (scale1 * err.1).sqrt();
    Ok((rms0, relative(err.0, norm.0), rms1, relative(err.1, norm.1)))
}

/// `sqrt(err / norm)` with the 0/0 case defined as 0 and x/0 as infinity.
fn relative(err: f64, norm: f64) -> f64 {
    if norm == 0.0 {
        if err == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (err / norm).sqrt()
    }
}

/// Order-folded squared coefficient distance
/// `sum_l |d_{l,0}|^2 + 2 sum_{m>=1} |d_{l,m}|^2` with
/// `d = a_hat - a`; by Parseval this equals the squared quadrature L²
/// error of the synthesized difference. Differing degree bounds are
/// handled by zero-extending the shorter table.
pub fn coeff_l2_error(a_hat: &HarmonicCoeffs, a: &HarmonicCoeffs) -> f64 {
    let l_max = a_hat.l_max().max(a.l_max());
    let fetch = |c: &HarmonicCoeffs, l: usize, m: usize| {
        if l <= c.l_max() {
            c.get(l, m)
        } else {
            crate::Complex64::new(0.0, 0.0)
        }
    };
    let mut sum = 0.0;
    for l in 0..=l_max {
        sum += (fetch(a_hat, l, 0) - fetch(a, l, 0)).norm_sqr();
        for m in 1..=l {
            sum += 2.0 * (fetch(a_hat, l, m) - fetch(a, l, m)).norm_sqr();
        }
    }
    sum
}
