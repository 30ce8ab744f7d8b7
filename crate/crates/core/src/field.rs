//! Gaussian random coefficient realizations from angular power spectra,
//! plus masked-data generation by the per-order matrix route and by the
//! pointwise pixel route.
//!
//! Sampling is deterministic per `(seed value, stream label)`: the label is
//! hashed into the seed material, so distinct labels (e.g. signal vs.
//! noise) yield statistically independent streams from the same user-facing
//! seed integer.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::harmonics::{analyze, synthesize, HarmonicCoeffs, SphereGrid};
use crate::mask::MaskCoeffs;
use crate::operator::MaskOperatorBlock;
use crate::Complex64;

/// Nonnegative per-degree variances `C_l`, `l = 0..=degree_bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    values: Vec<f64>,
}

impl PowerSpectrum {
    /// Builds a spectrum from explicit per-degree values.
    ///
    /// Fails on an empty list or any negative (or non-finite) entry.
    pub fn from_values(values: Vec<f64>) -> Result<Self, Error> {
        if values.is_empty() {
            return Err(Error::Empty("power spectrum needs at least degree 0"));
        }
        if values.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::Domain("power spectrum entries must be finite and >= 0"));
        }
        Ok(Self { values })
    }

    /// Flat-then-linearly-tapered spectrum on `l = 0..=l_max`:
    /// `C_l = 1` for `l/(l_max+1) <= 1/2` and `C_l = 2 - 2 l/(l_max+1)`
    /// above, decaying toward (but not reaching) zero at `l = l_max`.
    ///
    /// By default the monopole and dipole entries are zeroed, which also
    /// exercises the estimator's zero-variance handling; pass
    /// `include_monopole_dipole = true` to keep `C_0 = C_1 = 1`.
    pub fn tapered(l_max: usize, include_monopole_dipole: bool) -> Self {
        let denom = (l_max + 1) as f64;
        let mut values: Vec<f64> = (0..=l_max)
            .map(|l| {
                let x = l as f64 / denom;
                if x <= 0.5 {
                    1.0
                } else {
                    2.0 - 2.0 * x
                }
            })
            .collect();
        if !include_monopole_dipole {
            values[0] = 0.0;
            if l_max >= 1 {
                values[1] = 0.0;
            }
        }
        Self { values }
    }

    /// Largest degree carried by the spectrum.
    pub fn degree_bound(&self) -> usize {
        self.values.len() - 1
    }

    /// `C_l`, zero beyond the stored degree bound.
    pub fn value(&self, l: usize) -> f64 {
        self.values.get(l).copied().unwrap_or(0.0)
    }

    /// All stored values in degree order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Noise covariance proportional to a base spectrum: `N_l = tau * C_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    tau: f64,
    base: PowerSpectrum,
}

impl NoiseModel {
    /// Fails when `tau` is negative or non-finite.
    pub fn new(tau: f64, base: PowerSpectrum) -> Result<Self, Error> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::Domain("noise level tau must be finite and >= 0"));
        }
        Ok(Self { tau, base })
    }

    /// Noise-to-signal variance ratio.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// The base (signal) spectrum the noise level multiplies.
    pub fn base(&self) -> &PowerSpectrum {
        &self.base
    }

    /// `N_l = tau * C_l`.
    pub fn value(&self, l: usize) -> f64 {
        self.tau * self.base.value(l)
    }

    /// The noise spectrum materialized as a standalone `PowerSpectrum`.
    pub fn spectrum(&self) -> PowerSpectrum {
        PowerSpectrum {
            values: self.base.values.iter().map(|&c| self.tau * c).collect(),
        }
    }
}

/// Reproducible randomness source: a user-facing 64-bit seed plus a stream
/// label. The same `(value, stream)` pair always yields the same draws;
/// different labels yield independent streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seed {
    value: u64,
    stream: String,
}

/// FNV-1a 64-bit hash, used to fold the stream label into the seed.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 step: advances `state` and returns the next output word.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    pub fn new(value: u64, stream: &str) -> Self {
        Self {
            value,
            stream: String::from(stream),
        }
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn stream(&self) -> &str {
        &self.stream
    }

    /// Expands the `(value, stream)` pair into a full 256-bit generator
    /// state via SplitMix64, so that nearby seed integers and similar
    /// labels still give unrelated streams.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut state = self.value ^ fnv1a64(self.stream.as_bytes());
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha12Rng::from_seed(key)
    }
}

/// Draws one coefficient set with independent Gaussian entries:
/// `a_{l,0} ~ Normal(0, C_l)` real, and for `m > 0` real and imaginary
/// parts each `~ Normal(0, C_l / 2)`, so that `E[a_{l,m} conj(a_{l,m})]
/// = C_l` for every order. Negative orders are implied by the reality
/// symmetry of the coefficient table.
///
/// The generator is advanced in a fixed order (degree-major, order-minor,
/// one draw for `m = 0` and two per `m > 0`) regardless of zero spectrum
/// entries, so realizations at the same degree bound stay aligned across
/// different spectra.
pub fn sample_field(spectrum: &PowerSpectrum, seed: &Seed) -> HarmonicCoeffs {
    let l_max = spectrum.degree_bound();
    let mut rng = seed.rng();
    let mut coeffs = HarmonicCoeffs::zeros(l_max);
    for l in 0..=l_max {
        let c = spectrum.value(l);
        let scale = c.sqrt();
        let half_scale = (0.5 * c).sqrt();
        for m in 0..=l {
            if m == 0 {
                let z: f64 = rng.sample(StandardNormal);
                let value = if c == 0.0 { 0.0 } else { scale * z };
                coeffs.set(l, 0, Complex64::new(value, 0.0));
            } else {
                let zr: f64 = rng.sample(StandardNormal);
                let zi: f64 = rng.sample(StandardNormal);
                let value = if c == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(half_scale * zr, half_scale * zi)
                };
                coeffs.set(l, m, value);
            }
        }
    }
    coeffs
}

/// Draws a noise realization with spectrum `N_l = tau * C_l`.
///
/// Independence from the signal realization is obtained by seeding with a
/// different stream label, not by internal offsetting; callers sampling
/// both must pass distinct labels (the command-line driver uses `"field"`
/// and `"noise"`).
pub fn sample_noise(model: &NoiseModel, seed: &Seed) -> HarmonicCoeffs {
    sample_field(&model.spectrum(), seed)
}

fn added(a: &HarmonicCoeffs, eps: &HarmonicCoeffs) -> Result<HarmonicCoeffs, Error> {
    if a.l_max() != eps.l_max() {
        return Err(Error::ShapeMismatch(
            "signal and noise coefficient tables must share a degree bound",
        ));
    }
    let mut sum = HarmonicCoeffs::zeros(a.l_max());
    for (dst, (&x, &y)) in sum
        .as_mut_slice()
        .iter_mut()
        .zip(a.as_slice().iter().zip(eps.as_slice().iter()))
    {
        *dst = x + y;
    }
    Ok(sum)
}

/// Masked data by the matrix route: for each order `m`, applies the
/// per-order mask operator block to the order-`m` slice of `a + eps`,
/// producing the right-hand side indexed by degrees `j = m..=j_max`.
///
/// `blocks[m]` must be the order-`m` block and all blocks must share the
/// degree bounds of the coefficient tables.
pub fn masked_data_matrix(
    a: &HarmonicCoeffs,
    eps: &HarmonicCoeffs,
    blocks: &[MaskOperatorBlock],
) -> Result<Vec<Vec<Complex64>>, Error> {
    let sum = added(a, eps)?;
    let l_max = sum.l_max();
    if blocks.len() != l_max + 1 {
        return Err(Error::ShapeMismatch(
            "need exactly one operator block per order m = 0..=l_max",
        ));
    }
    let mut rhs = Vec::with_capacity(blocks.len());
    for (m, block) in blocks.iter().enumerate() {
        if block.m() != m || block.l_max() != l_max {
            return Err(Error::ShapeMismatch(
                "operator block order or degree bound does not match the coefficients",
            ));
        }
        let slice: Vec<Complex64> = (m..=l_max).map(|l| sum.get(l, m)).collect();
        rhs.push(block.apply_complex(&slice));
    }
    Ok(rhs)
}

/// Masked data by the pixel route: synthesizes `a + eps` on a quadrature
/// grid, multiplies pointwise by the degree-truncated mask, and analyzes
/// the product up to degree `j_max`.
///
/// The grid is sized for exactness `l_max + mask degree + j_max`, so every
/// projection integral of the band-limited product is exact and the result
/// matches the matrix route to rounding error.
pub fn masked_data_pixel(
    a: &HarmonicCoeffs,
    eps: &HarmonicCoeffs,
    mask: &MaskCoeffs,
    j_max: usize,
) -> Result<HarmonicCoeffs, Error> {
    let grid = SphereGrid::for_exactness(a.l_max() + mask.degree() + j_max);
    masked_data_pixel_on_grid(a, eps, mask, j_max, &grid)
}

/// [`masked_data_pixel`] on a caller-chosen quadrature grid.
///
/// With exactness below `l_max + mask degree + j_max` the analysis
/// integrals are inexact and the result drifts from the matrix route —
/// useful for studying that quadrature error, ruinous otherwise.
pub fn masked_data_pixel_on_grid(
    a: &HarmonicCoeffs,
    eps: &HarmonicCoeffs,
    mask: &MaskCoeffs,
    j_max: usize,
    grid: &SphereGrid,
) -> Result<HarmonicCoeffs, Error> {
    let sum = added(a, eps)?;
    let mut samples = synthesize(&sum, grid);
    for t in 0..grid.n_theta() {
        let v = mask.truncated_value(grid.node(t));
        for value in samples.row_mut(t) {
            *value *= v;
        }
    }
    Ok(analyze(&samples, grid, j_max))
}
