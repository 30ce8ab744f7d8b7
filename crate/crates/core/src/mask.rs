//! Axially symmetric C³ equatorial-band mask: pointwise values, zonal
//! harmonic coefficients, and extrema of the truncated series.
//!
//! The mask vanishes within a latitude band around the equator, equals one
//! beyond a second latitude, and transitions through a C³ polynomial step
//! in between. Being longitude-independent it expands purely in zonal
//! harmonics `Y_{k,0}`, with real coefficients `w_k` that vanish for odd
//! `k` by evenness in `z`.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use core::f64::consts::PI;

use crate::error::Error;
use crate::harmonics::{gauss_legendre, HarmonicCoeffs};
use crate::Complex64;

/// C³ monotone step: `0` for `x <= 0`, `1` for `x >= 1`, and
/// `x^4 (35 - 84 x + 70 x^2 - 20 x^3)` between. Its first three
/// derivatives vanish at both junctions.
pub fn smoothstep_p(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let x2 = x * x;
        x2 * x2 * (35.0 - 84.0 * x + 70.0 * x2 - 20.0 * x2 * x)
    }
}

/// Equatorial-band mask geometry plus the expansion degree bound.
///
/// Latitudes are in radians: the mask is exactly zero within `a_lat` of
/// the equator, exactly one beyond `b_lat`, and transitions in between as
/// a function of `z = sin(latitude)`.
#[derive(Debug, Clone, Copy)]
pub struct AxialMaskSpec {
    a_lat: f64,
    b_lat: f64,
    degree: usize,
    z_a: f64,
    z_b: f64,
}

impl AxialMaskSpec {
    /// Validates `0 < a_lat < b_lat < pi/2` and `degree >= 1`.
    pub fn new(a_lat: f64, b_lat: f64, degree: usize) -> Result<Self, Error> {
        if !(a_lat > 0.0 && a_lat < b_lat && b_lat < PI / 2.0) {
            return Err(Error::Domain(
                "mask latitudes must satisfy 0 < a_lat < b_lat < pi/2",
            ));
        }
        if degree == 0 {
            return Err(Error::Domain("mask expansion degree must be at least 1"));
        }
        Ok(AxialMaskSpec {
            a_lat,
            b_lat,
            degree,
            z_a: a_lat.sin(),
            z_b: b_lat.sin(),
        })
    }

    pub fn a_lat(&self) -> f64 {
        self.a_lat
    }

    pub fn b_lat(&self) -> f64 {
        self.b_lat
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `z` thresholds `(sin a_lat, sin b_lat)` of the transition band.
    pub fn band_z(&self) -> (f64, f64) {
        (self.z_a, self.z_b)
    }
}

/// Mask value at `z = sin(latitude)`: zero inside the band, one outside,
/// C³ monotone between; even in `z`.
pub fn mask_value(spec: &AxialMaskSpec, z: f64) -> f64 {
    smoothstep_p((z.abs() - spec.z_a) / (spec.z_b - spec.z_a))
}

/// Zonal harmonic coefficients `w_k` of an axial mask, `k = 0..=degree`.
#[derive(Debug, Clone)]
pub struct MaskCoeffs {
    degree: usize,
    w: Vec<f64>,
}

impl MaskCoeffs {
    /// Coefficients of the constant mask `v = 1`: `w_0 = sqrt(4 pi)`,
    /// everything else zero. Useful as the no-masking baseline.
    pub fn uniform(degree: usize) -> Self {
        let mut w = vec![0.0; degree + 1];
        w[0] = (4.0 * PI).sqrt();
        MaskCoeffs { degree, w }
    }

    /// Wrap explicit coefficients `w_k`, `k = 0..=w.len()-1` (as read back
    /// from a coefficient file, or hand-built in tests).
    pub fn from_coefficients(w: Vec<f64>) -> Self {
        assert!(!w.is_empty(), "coefficient list cannot be empty");
        MaskCoeffs {
            degree: w.len() - 1,
            w,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.w[k]
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Truncated mask `sum_k w_k sqrt((2k+1)/4pi) P_k(z)`.
    ///
    /// Unlike the exact C³ mask this is a polynomial: Gibbs-style
    /// overshoot can push it slightly below 0 near the equator and above
    /// 1 on the caps.
    pub fn truncated_value(&self, z: f64) -> f64 {
        let mut total = self.w[0] * (1.0 / (4.0 * PI)).sqrt();
        let (mut p0, mut p1) = (1.0_f64, z);
        for k in 1..=self.degree {
            total += self.w[k] * ((2 * k + 1) as f64 / (4.0 * PI)).sqrt() * p1;
            let kf = (k + 1) as f64;
            let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        total
    }

    /// The coefficients as a full harmonic set (order-zero entries only).
    pub fn to_harmonic_coeffs(&self) -> HarmonicCoeffs {
        let mut out = HarmonicCoeffs::zeros(self.degree);
        for (k, &w) in self.w.iter().enumerate() {
            out.set(k, 0, Complex64::new(w, 0.0));
        }
        out
    }
}

/// Expansion coefficients `w_k = 2 pi sqrt((2k+1)/4pi) integral v(z) P_k(z) dz`
/// by Gauss-Legendre quadrature, with the node count doubled until no
/// coefficient moves by more than 1e-12. Odd-`k` entries are exactly
/// zero (the mask is even in `z`).
pub fn mask_coeffs(spec: &AxialMaskSpec) -> MaskCoeffs {
    let k_max = spec.degree;
    let mut n = k_max + 64;
    let mut w = mask_coeffs_pass(spec, n);
    for _ in 0..12 {
        n *= 2;
        let next = mask_coeffs_pass(spec, n);
        let delta = w
            .iter()
            .zip(&next)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        w = next;
        if delta <= 1e-12 {
            let mut w = w;
            for k in (1..=k_max).step_by(2) {
                w[k] = 0.0;
            }
            return MaskCoeffs { degree: k_max, w };
        }
    }
    log::warn!("mask coefficient quadrature not fully settled at {n} nodes");
    for k in (1..=k_max).step_by(2) {
        w[k] = 0.0;
    }
    MaskCoeffs { degree: k_max, w }
}

fn mask_coeffs_pass(spec: &AxialMaskSpec, n: usize) -> Vec<f64> {
    let (x, gw) = gauss_legendre(n);
    let k_max = spec.degree;
    let mut acc = vec![0.0_f64; k_max + 1];
    for (&z, &wt) in x.iter().zip(&gw) {
        let v = mask_value(spec, z);
        if v == 0.0 {
            continue;
        }
        let f = wt * v;
        // P_k(z) column by recurrence, accumulated on the fly.
        let (mut p0, mut p1) = (1.0_f64, z);
        acc[0] += f;
        for (k, slot) in acc.iter_mut().enumerate().skip(1) {
            *slot += f * p1;
            let kf = (k + 1) as f64;
            let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
    }
    for (k, slot) in acc.iter_mut().enumerate() {
        *slot *= 2.0 * PI * ((2 * k + 1) as f64 / (4.0 * PI)).sqrt();
    }
    acc
}

/// Minimum and maximum of the truncated mask over `n_samples`
/// Chebyshev-distributed points of `[-1, 1]` (endpoints included).
///
/// Requires `n_samples >= 4 * degree` so a degree-`K` polynomial's
/// oscillations cannot slip between samples.
pub fn mask_extrema(coeffs: &MaskCoeffs, n_samples: usize) -> (f64, f64) {
    assert!(
        n_samples >= 4 * coeffs.degree() && n_samples >= 2,
        "extrema scan needs at least 4 * degree samples"
    );
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n_samples {
        let z = (PI * i as f64 / (n_samples - 1) as f64).cos();
        let v = coeffs.truncated_value(z);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::{analyze, FieldSamples, SphereGrid};
    use approx::assert_relative_eq;

    fn band_spec(degree: usize) -> AxialMaskSpec {
        AxialMaskSpec::new(10.0_f64.to_radians(), 20.0_f64.to_radians(), degree).unwrap()
    }

    #[test]
    fn smoothstep_endpoints_and_midpoint() {
        assert_eq!(smoothstep_p(0.0), 0.0);
        assert_eq!(smoothstep_p(1.0), 1.0);
        assert_eq!(smoothstep_p(-0.5), 0.0);
        assert_eq!(smoothstep_p(1.5), 1.0);
        assert_relative_eq!(smoothstep_p(0.5), 0.5, epsilon = 1e-15);
        // Direct polynomial evaluation: 0.25^4 * (35 - 21 + 4.375 - 0.3125).
        assert_relative_eq!(smoothstep_p(0.25), 0.070556640625, epsilon = 1e-15);
    }

    #[test]
    fn smoothstep_is_monotone_and_flat_at_junctions() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let v = smoothstep_p(i as f64 / 1000.0);
            assert!(v >= prev, "not monotone at {i}");
            prev = v;
        }
        // C3 junctions: finite-difference slope is tiny next to the ends.
        let h = 1e-4;
        assert!(smoothstep_p(h) / h < 1e-10);
        assert!((1.0 - smoothstep_p(1.0 - h)) / h < 1e-10);
    }

    #[test]
    fn spec_validation() {
        assert!(AxialMaskSpec::new(0.0, 0.3, 10).is_err());
        assert!(AxialMaskSpec::new(0.4, 0.3, 10).is_err());
        assert!(AxialMaskSpec::new(0.2, 1.6, 10).is_err());
        assert!(AxialMaskSpec::new(0.2, 0.3, 0).is_err());
        assert!(AxialMaskSpec::new(0.2, 0.3, 1).is_ok());
    }

    #[test]
    fn mask_value_band_semantics() {
        let spec = band_spec(10);
        // Fully masked within 10 degrees of the equator.
        assert_eq!(mask_value(&spec, 5.0_f64.to_radians().sin()), 0.0);
        assert_eq!(mask_value(&spec, 0.0), 0.0);
        // Fully visible beyond 20 degrees.
        assert_eq!(mask_value(&spec, 25.0_f64.to_radians().sin()), 1.0);
        assert_eq!(mask_value(&spec, 1.0), 1.0);
        // Transition value by direct evaluation.
        let z15 = 15.0_f64.to_radians().sin();
        let arg = (z15 - spec.band_z().0) / (spec.band_z().1 - spec.band_z().0);
        assert_relative_eq!(mask_value(&spec, z15), smoothstep_p(arg), epsilon = 1e-15);
        // Even, and monotone in |z| through the band.
        let mut prev = -1.0;
        for i in 0..=200 {
            let z = spec.band_z().0 + (spec.band_z().1 - spec.band_z().0) * i as f64 / 200.0;
            assert_eq!(mask_value(&spec, z), mask_value(&spec, -z));
            let v = mask_value(&spec, z);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn uniform_mask_coefficients() {
        let w = MaskCoeffs::uniform(6);
        assert_relative_eq!(w.coeff(0), (4.0 * PI).sqrt(), epsilon = 1e-15);
        for k in 1..=6 {
            assert_eq!(w.coeff(k), 0.0);
        }
        for z in [-1.0, -0.3, 0.0, 0.8] {
            assert_relative_eq!(w.truncated_value(z), 1.0, epsilon = 1e-14);
        }
        let (lo, hi) = mask_extrema(&w, 24);
        assert_relative_eq!(lo, 1.0, epsilon = 1e-12);
        assert_relative_eq!(hi, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn odd_coefficients_vanish_for_even_mask() {
        let coeffs = mask_coeffs(&band_spec(21));
        for k in (1..=21).step_by(2) {
            assert_eq!(coeffs.coeff(k), 0.0, "k = {k}");
        }
        // Even entries are genuinely non-trivial.
        assert!(coeffs.coeff(0) > 0.0);
        assert!(coeffs.coeff(2).abs() > 1e-3);
    }

    #[test]
    fn coefficients_match_two_dimensional_analysis() {
        // Independent route: sample the mask on a sphere grid and run the
        // full 2-D projection; the zonal coefficients must agree.
        let degree = 900;
        let spec = band_spec(degree);
        let coeffs = mask_coeffs(&spec);
        let grid = SphereGrid::with_shape(2400, 8);
        let samples = FieldSamples::from_fn(&grid, |z, _| mask_value(&spec, z));
        let full = analyze(&samples, &grid, degree);
        for k in 0..=degree {
            let got = full.get(k, 0);
            assert!(
                (got.re - coeffs.coeff(k)).abs() < 1e-10,
                "k = {k}: {} vs {}",
                got.re,
                coeffs.coeff(k)
            );
            assert!(got.im.abs() < 1e-14);
        }
    }

    #[test]
    fn coefficients_decay_like_a_c3_function() {
        let coeffs = mask_coeffs(&band_spec(900));
        let max = coeffs.w().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(coeffs.coeff(900).abs() < 1e-6 * max);
    }

    #[test]
    fn truncation_error_decreases_with_degree() {
        let mut worst = Vec::new();
        for degree in [100, 300, 900] {
            let spec = band_spec(degree);
            let coeffs = mask_coeffs(&spec);
            let mut max_err = 0.0_f64;
            for i in 0..=2000 {
                let z = -1.0 + 2.0 * i as f64 / 2000.0;
                max_err = max_err.max((coeffs.truncated_value(z) - mask_value(&spec, z)).abs());
            }
            worst.push(max_err);
        }
        assert!(worst[0] > worst[1] && worst[1] > worst[2], "{worst:?}");
    }

    #[test]
    fn extrema_of_band_mask_at_degree_900() {
        let coeffs = mask_coeffs(&band_spec(900));
        let (lo, hi) = mask_extrema(&coeffs, 4096);
        // The truncated mask still reaches ~1 on the caps and ~0 near the
        // equator; overshoot may push it slightly outside [0, 1].
        assert!(hi >= 1.0 - 1e-6, "v_max = {hi}");
        assert!(lo <= 1e-3, "v_min = {lo}");
        assert!(hi < 1.1 && lo > -0.1, "extrema far outside expectations");
    }
}
