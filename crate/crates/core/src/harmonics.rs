//! Real-field spherical-harmonic analysis and synthesis on product grids.
//!
//! Coefficients are stored for non-negative orders only; the negative-order
//! half of a real field is implied by conjugation symmetry. Grids are
//! Gauss-Legendre in the polar direction and uniform in azimuth, so the
//! sphere quadrature is exact for integrands of bounded combined degree —
//! the grid tracks that bound and [`analyze`] warns when asked to resolve
//! coefficients past it.
//!
//! Normalized associated Legendre functions are evaluated with an
//! extended-range scheme (a manual exponent alongside the mantissa), so
//! high orders near the poles neither underflow to zero prematurely nor
//! lose the recurrence thread; degrees in the thousands are fine.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use core::f64::consts::PI;

use crate::Complex64;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes ascending. Exact for polynomials of degree `2n - 1`.
///
/// Nodes are Newton-refined from the Chebyshev-angle initial guess; each
/// converges in a handful of iterations at any practical `n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "quadrature rule needs at least one node");
    let mut nodes = vec![0.0_f64; n];
    let mut weights = vec![0.0_f64; n];
    let half = n / 2;
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P_{n-1}(x) by the three-term recurrence.
            let (mut p0, mut p1) = (1.0_f64, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        // One clean evaluation of the derivative at the converged node.
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // Middle node is exactly zero by symmetry.
        let (mut p0, mut p1) = (1.0_f64, 0.0);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = (-(kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        // P'_n(0) = n * (0*P_n - P_{n-1}) / (0 - 1) = n * P_{n-1}(0).
        let dp = n as f64 * p0;
        nodes[half] = 0.0;
        weights[half] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_l(x)` by the three-term recurrence.
pub fn legendre_p(l: usize, x: f64) -> f64 {
    if l == 0 {
        return 1.0;
    }
    let (mut p0, mut p1) = (1.0_f64, x);
    for k in 2..=l {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

// Extended-range scale: values are held as v * SCALE^k with k >= 0, and
// rescaled whenever |v| leaves [SCALE_LO, SCALE_HI]. SCALE^2 is still a
// normal f64, so one deferred multiply per step cannot skip the subnormal
// range on the way to zero.
const SCALE: f64 = 1e-280;
const INV_SCALE: f64 = 1e280;
const SCALE_LO: f64 = 1e-280;
const SCALE_HI: f64 = 1e280;

#[inline]
fn descale(v: f64, k: i32) -> f64 {
    let mut out = v;
    for _ in 0..k {
        out *= SCALE;
    }
    out
}

/// Column of orthonormal associated Legendre functions
/// `Pbar_{l,m}(x)` for `l = m ..= l_max` at fixed order `m`, defined so
/// that `Y_{l,m} = Pbar_{l,m}(cos theta) e^{i m phi}` has unit norm on the
/// sphere. The Condon-Shortley sign is included. Empty when `l_max < m`.
pub fn normalized_assoc_legendre_column(l_max: usize, m: usize, x: f64) -> Vec<f64> {
    if l_max < m {
        return Vec::new();
    }
    debug_assert!((-1.0..=1.0).contains(&x), "argument outside [-1, 1]");
    let mut out = Vec::with_capacity(l_max - m + 1);
    let sin2 = ((1.0 - x) * (1.0 + x)).max(0.0);
    let sin = sin2.sqrt();

    // Diagonal climb: Pbar_{m,m} = -sqrt((2m+1)/(2m)) sin(theta) Pbar_{m-1,m-1}.
    let mut diag = 1.0 / (4.0 * PI).sqrt();
    let mut k = 0_i32;
    for mm in 1..=m {
        diag *= -(((2 * mm + 1) as f64) / ((2 * mm) as f64)).sqrt() * sin;
        if diag.abs() < SCALE_LO && diag != 0.0 {
            diag *= INV_SCALE;
            k += 1;
        }
    }
    out.push(descale(diag, k));
    if l_max == m {
        return out;
    }

    // First superdiagonal, then the degree recurrence at fixed order:
    // Pbar_{l,m} = c_l (x Pbar_{l-1,m} - d_l Pbar_{l-2,m}).
    let mut prev = diag;
    let mut prev_k = k;
    let mut curr = x * ((2 * m + 3) as f64).sqrt() * diag;
    let mut curr_k = k;
    out.push(descale(curr, curr_k));
    for l in (m + 2)..=l_max {
        let lf = l as f64;
        let mf = m as f64;
        let c = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let d = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
            .sqrt();
        // Align the older value onto the current scale before combining.
        let prev_aligned = if prev_k == curr_k {
            prev
        } else {
            // prev_k can exceed curr_k by at most one rescale.
            prev * SCALE.powi(prev_k - curr_k)
        };
        let next = c * (x * curr - d * prev_aligned);
        prev = curr;
        prev_k = curr_k;
        curr = next;
        if curr.abs() < SCALE_LO && curr != 0.0 {
            curr *= INV_SCALE;
            prev *= INV_SCALE;
            curr_k += 1;
            prev_k += 1;
        } else if curr.abs() > SCALE_HI && curr_k > 0 {
            curr *= SCALE;
            prev *= SCALE;
            curr_k -= 1;
            prev_k -= 1;
        }
        out.push(descale(curr, curr_k));
    }
    out
}

/// Single orthonormal associated Legendre value `Pbar_{l,m}(x)`.
pub fn normalized_assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    *normalized_assoc_legendre_column(l, m, x)
        .last()
        .expect("l >= m yields a non-empty column")
}

/// Product quadrature grid: Gauss-Legendre nodes in `z = cos theta`,
/// uniform angles in `phi`, with the combined polynomial degree the rule
/// integrates exactly.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    n_phi: usize,
    exactness: usize,
}

impl SphereGrid {
    /// Grid with explicit shape. Exactness is derived:
    /// `min(2 n_theta - 1, n_phi - 1)`.
    pub fn with_shape(n_theta: usize, n_phi: usize) -> Self {
        assert!(n_theta > 0 && n_phi > 0, "grid must have nodes");
        let (nodes, weights) = gauss_legendre(n_theta);
        let exactness = (2 * n_theta - 1).min(n_phi - 1);
        SphereGrid {
            nodes,
            weights,
            n_phi,
            exactness,
        }
    }

    /// Smallest grid whose quadrature is exact for spherical polynomials
    /// of combined degree `e` (products of harmonics with degrees summing
    /// to at most `e`).
    pub fn for_exactness(e: usize) -> Self {
        let n_theta = (e + 2) / 2;
        let n_theta = n_theta.max(1);
        SphereGrid::with_shape(n_theta, e + 1)
    }

    pub fn n_theta(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    /// Largest combined degree integrated exactly.
    pub fn exactness(&self) -> usize {
        self.exactness
    }

    /// `z` coordinate of polar row `t` (ascending in `z`).
    pub fn node(&self, t: usize) -> f64 {
        self.nodes[t]
    }

    /// Gauss-Legendre weight of polar row `t` (sums to 2 over rows).
    pub fn weight(&self, t: usize) -> f64 {
        self.weights[t]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn phi(&self, p: usize) -> f64 {
        2.0 * PI * p as f64 / self.n_phi as f64
    }

    /// Full sphere-quadrature weight of sample `(t, p)`; independent of
    /// `p`, and summing to `4 pi` over the grid.
    pub fn quadrature_weight(&self, t: usize) -> f64 {
        self.weights[t] * 2.0 * PI / self.n_phi as f64
    }

    fn phi_tables(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_phi;
        let mut cos_t = Vec::with_capacity(n);
        let mut sin_t = Vec::with_capacity(n);
        for k in 0..n {
            let a = 2.0 * PI * k as f64 / n as f64;
            cos_t.push(a.cos());
            sin_t.push(a.sin());
        }
        (cos_t, sin_t)
    }
}

/// Real samples on a [`SphereGrid`], row-major: index `t * n_phi + p`.
#[derive(Debug, Clone)]
pub struct FieldSamples {
    n_theta: usize,
    n_phi: usize,
    values: Vec<f64>,
}

impl FieldSamples {
    pub fn zeros(grid: &SphereGrid) -> Self {
        FieldSamples {
            n_theta: grid.n_theta(),
            n_phi: grid.n_phi(),
            values: vec![0.0; grid.n_theta() * grid.n_phi()],
        }
    }

    /// Evaluate `f(z, phi)` at every sample.
    pub fn from_fn(grid: &SphereGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut out = FieldSamples::zeros(grid);
        for t in 0..grid.n_theta() {
            let z = grid.node(t);
            for p in 0..grid.n_phi() {
                out.values[t * grid.n_phi() + p] = f(z, grid.phi(p));
            }
        }
        out
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn value(&self, t: usize, p: usize) -> f64 {
        self.values[t * self.n_phi + p]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_phi..(t + 1) * self.n_phi]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.values[t * self.n_phi..(t + 1) * self.n_phi]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Spherical-harmonic coefficients of a real field, stored for `m >= 0`
/// only in a packed triangle: `a_{l,m}` lives at `l (l+1) / 2 + m`.
#[derive(Debug, Clone)]
pub struct HarmonicCoeffs {
    l_max: usize,
    data: Vec<Complex64>,
}

impl HarmonicCoeffs {
    pub fn zeros(l_max: usize) -> Self {
        HarmonicCoeffs {
            l_max,
            data: vec![Complex64::new(0.0, 0.0); (l_max + 1) * (l_max + 2) / 2],
        }
    }

    /// Packed index of `(l, m)` with `m >= 0`.
    #[inline]
    pub fn idx(l: usize, m: usize) -> usize {
        debug_assert!(m <= l);
        l * (l + 1) / 2 + m
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Number of stored (non-negative order) entries.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.data[Self::idx(l, m)]
    }

    pub fn set(&mut self, l: usize, m: usize, v: Complex64) {
        self.data[Self::idx(l, m)] = v;
    }

    /// Coefficient at any order, folding negative `m` through the reality
    /// condition `a_{l,-m} = (-1)^m conj(a_{l,m})`.
    pub fn coeff(&self, l: usize, m: i64) -> Complex64 {
        if m >= 0 {
            self.get(l, m as usize)
        } else {
            let mm = (-m) as usize;
            let v = self.get(l, mm).conj();
            if mm % 2 == 0 {
                v
            } else {
                -v
            }
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Squared coefficient norm of the full (both-sign) expansion:
    /// `sum_l |a_{l,0}|^2 + 2 sum_{m>=1} |a_{l,m}|^2`. Equals the squared
    /// field norm `integral |f|^2` by Parseval.
    pub fn norm_squared(&self) -> f64 {
        let mut total = 0.0;
        for l in 0..=self.l_max {
            total += self.get(l, 0).norm_sqr();
            for m in 1..=l {
                total += 2.0 * self.get(l, m).norm_sqr();
            }
        }
        total
    }
}

/// Evaluate the real field of `coeffs` at every grid sample.
///
/// The field is the Hermitian extension `f = sum_{l,m>=0} ...` with the
/// negative orders implied; any imaginary part stored at `m = 0` is
/// ignored, since the reality condition forces those entries real.
pub fn synthesize(coeffs: &HarmonicCoeffs, grid: &SphereGrid) -> FieldSamples {
    let l_max = coeffs.l_max();
    let n_phi = grid.n_phi();
    let (cos_t, sin_t) = grid.phi_tables();
    let mut out = FieldSamples::zeros(grid);
    let mut g = vec![Complex64::new(0.0, 0.0); l_max + 1];
    for t in 0..grid.n_theta() {
        let z = grid.node(t);
        for (m, gm) in g.iter_mut().enumerate() {
            let col = normalized_assoc_legendre_column(l_max, m, z);
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, pbar) in col.iter().enumerate() {
                acc += coeffs.get(m + i, m) * pbar;
            }
            *gm = acc;
        }
        let row = out.row_mut(t);
        for (p, sample) in row.iter_mut().enumerate() {
            let mut v = g[0].re;
            let mut idx = 0;
            for gm in g.iter().skip(1) {
                idx += p;
                if idx >= n_phi {
                    idx -= n_phi;
                }
                // 2 Re(G_m e^{i m phi})
                v += 2.0 * (gm.re * cos_t[idx] - gm.im * sin_t[idx]);
            }
            *sample = v;
        }
    }
    out
}

/// Project grid samples onto harmonics up to `l_max` by quadrature.
///
/// Exact (to roundoff) whenever the samples come from a band-limited field
/// of degree `L` and the grid is exact to combined degree `L + l_max`;
/// logs a warning when the grid cannot even resolve `2 l_max`, since the
/// projection is then unreliable for a generic degree-`l_max` field.
pub fn analyze(samples: &FieldSamples, grid: &SphereGrid, l_max: usize) -> HarmonicCoeffs {
    assert_eq!(
        (samples.n_theta(), samples.n_phi()),
        (grid.n_theta(), grid.n_phi()),
        "samples and grid shapes differ"
    );
    if grid.exactness() < 2 * l_max {
        log::warn!(
            "analysis to degree {} on a grid exact only to combined degree {}; \
             coefficients may alias",
            l_max,
            grid.exactness()
        );
    }
    let n_phi = grid.n_phi();
    let (cos_t, sin_t) = grid.phi_tables();
    let dphi = 2.0 * PI / n_phi as f64;
    let mut out = HarmonicCoeffs::zeros(l_max);
    let mut fm = vec![Complex64::new(0.0, 0.0); l_max + 1];
    for t in 0..grid.n_theta() {
        let z = grid.node(t);
        let w = grid.weight(t);
        let row = samples.row(t);
        // Azimuthal transform of this row: F_m = dphi * sum_p f e^{-i m phi_p};
        // m = 0 stays exactly real.
        fm[0] = Complex64::new(row.iter().sum::<f64>() * dphi, 0.0);
        for (m, fm_m) in fm.iter_mut().enumerate().skip(1) {
            let step = m % n_phi;
            let mut re = 0.0;
            let mut im = 0.0;
            let mut idx = 0;
            for (p, f) in row.iter().enumerate() {
                if p > 0 {
                    idx += step;
                    if idx >= n_phi {
                        idx -= n_phi;
                    }
                }
                re += f * cos_t[idx];
                im -= f * sin_t[idx];
            }
            *fm_m = Complex64::new(re * dphi, im * dphi);
        }
        for m in 0..=l_max {
            let col = normalized_assoc_legendre_column(l_max, m, z);
            let contrib = fm[m] * w;
            for (i, pbar) in col.iter().enumerate() {
                let idx = HarmonicCoeffs::idx(m + i, m);
                out.data[idx] += contrib * *pbar;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn gauss_legendre_five_point_rule_is_textbook() {
        let (x, w) = gauss_legendre(5);
        let want_x = [
            -0.9061798459386640,
            -0.5384693101056831,
            0.0,
            0.5384693101056831,
            0.9061798459386640,
        ];
        let want_w = [
            0.2369268850561891,
            0.4786286704993665,
            0.5688888888888889,
            0.4786286704993665,
            0.2369268850561891,
        ];
        for i in 0..5 {
            assert_relative_eq!(x[i], want_x[i], epsilon = 1e-15);
            assert_relative_eq!(w[i], want_w[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn gauss_legendre_small_rules_and_weight_sums() {
        let (x, w) = gauss_legendre(1);
        assert_eq!(x, vec![0.0]);
        assert_eq!(w, vec![2.0]);
        let (x, w) = gauss_legendre(2);
        assert_relative_eq!(x[1], 1.0 / 3.0_f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        for n in [3, 7, 20, 64, 129, 501, 1000] {
            let (_, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_integrates_monomials_exactly() {
        for n in [1_usize, 2, 3, 8, 33] {
            let (x, w) = gauss_legendre(n);
            for k in 0..(2 * n) {
                let num: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let exact = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
                assert_relative_eq!(num, exact, epsilon = 1e-13, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn legendre_polynomial_known_values() {
        assert_eq!(legendre_p(0, 0.77), 1.0);
        assert_eq!(legendre_p(1, 0.77), 0.77);
        assert_relative_eq!(legendre_p(2, 0.5), -0.125, epsilon = 1e-16);
        // Frozen exact rational evaluation at x = 3/10.
        assert_relative_eq!(
            legendre_p(10, 0.3),
            0.2514763495160156250000000,
            max_relative = 1e-15
        );
    }

    // Frozen reference values from exact symbolic evaluation (rational
    // arguments), orthonormal normalization, Condon-Shortley included.
    const PBAR_CASES: &[(usize, usize, f64, f64)] = &[
        (0, 0, 1.0 / 3.0, 0.2820947917738781434740397),
        (1, 1, 0.0, -0.3454941494713354792652446),
        (3, 1, -0.9, -0.4296564777480777535227584),
        (6, 3, 0.3, 0.3409736445563126931407110),
        (10, 10, 0.7, 0.01872211526782582874907784),
        (40, 0, -0.2, -0.09553304115228414378601315),
        (100, 37, 0.5, -0.3546529788813779612531599),
        // High degrees, frozen from 600+ digit terminating-series sums.
        (2000, 1500, 0.2, 0.3873689384314013126748445),
        (3000, 0, 0.11, -0.2090262232542554001019485),
        (2000, 2000, 0.5, 2.30772575302064673313984e-125),
        // Decay region: the result is representable but intermediate
        // diagonal values are far below the underflow threshold.
        (2000, 1500, 0.9, 8.522815224758282366380961e-258),
    ];

    #[test]
    fn normalized_legendre_matches_frozen_values() {
        for &(l, m, x, want) in PBAR_CASES {
            let got = normalized_assoc_legendre(l, m, x);
            assert_relative_eq!(got, want, max_relative = 1e-11);
        }
    }

    #[test]
    fn normalized_legendre_underflows_to_exact_zero() {
        // True magnitudes ~1e-1714 and ~1e-605: far below f64 range.
        assert_eq!(normalized_assoc_legendre(2000, 1500, 0.999), 0.0);
        assert_eq!(normalized_assoc_legendre(1200, 1199, 0.95), 0.0);
        // And exactly zero at the poles for any m >= 1.
        assert_eq!(normalized_assoc_legendre(5, 3, 1.0), 0.0);
        assert_eq!(normalized_assoc_legendre(5, 3, -1.0), 0.0);
    }

    #[test]
    fn normalized_legendre_columns_are_orthonormal_under_quadrature() {
        // integral Pbar_{l,m} Pbar_{l',m} dz = delta_{l,l'} / (2 pi).
        let l_max = 12;
        let (x, w) = gauss_legendre(l_max + 1);
        for m in [0_usize, 1, 5, 12] {
            let cols: Vec<Vec<f64>> = x
                .iter()
                .map(|&xi| normalized_assoc_legendre_column(l_max, m, xi))
                .collect();
            for la in m..=l_max {
                for lb in m..=l_max {
                    let dot: f64 = (0..x.len())
                        .map(|i| w[i] * cols[i][la - m] * cols[i][lb - m])
                        .sum();
                    let want = if la == lb { 1.0 / (2.0 * PI) } else { 0.0 };
                    assert_relative_eq!(dot, want, epsilon = 1e-13, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn grid_exactness_shapes() {
        let g = SphereGrid::for_exactness(0);
        assert_eq!((g.n_theta(), g.n_phi()), (1, 1));
        let g = SphereGrid::for_exactness(128);
        assert_eq!((g.n_theta(), g.n_phi()), (65, 129));
        assert!(g.exactness() >= 128);
        // Quadrature weights cover the whole sphere.
        let total: f64 = (0..g.n_theta())
            .map(|t| g.quadrature_weight(t) * g.n_phi() as f64)
            .sum();
        assert_relative_eq!(total, 4.0 * PI, max_relative = 1e-14);
    }

    fn random_coeffs(l_max: usize, seed: u64) -> HarmonicCoeffs {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut c = HarmonicCoeffs::zeros(l_max);
        for l in 0..=l_max {
            let re: f64 = StandardNormal.sample(&mut rng);
            c.set(l, 0, Complex64::new(re, 0.0));
            for m in 1..=l {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                c.set(l, m, Complex64::new(re, im));
            }
        }
        c
    }

    #[test]
    fn synthesis_analysis_round_trip_is_exact() {
        for l_max in [0_usize, 1, 5, 64] {
            let coeffs = random_coeffs(l_max, 42 + l_max as u64);
            let grid = SphereGrid::for_exactness(2 * l_max);
            let field = synthesize(&coeffs, &grid);
            let back = analyze(&field, &grid, l_max);
            for l in 0..=l_max {
                for m in 0..=l {
                    let a = coeffs.get(l, m);
                    let b = back.get(l, m);
                    assert!(
                        (a - b).norm() <= 1e-10 * (1.0 + a.norm()),
                        "({l},{m}): {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn parseval_ties_field_norm_to_coefficient_norm() {
        let l_max = 32;
        let coeffs = random_coeffs(l_max, 7);
        let grid = SphereGrid::for_exactness(2 * l_max);
        let field = synthesize(&coeffs, &grid);
        let mut sq = 0.0;
        for t in 0..grid.n_theta() {
            let w = grid.quadrature_weight(t);
            for p in 0..grid.n_phi() {
                sq += w * field.value(t, p) * field.value(t, p);
            }
        }
        assert_relative_eq!(sq, coeffs.norm_squared(), max_relative = 1e-12);
    }

    #[test]
    fn analysis_of_real_field_keeps_zonal_coefficients_real() {
        let grid = SphereGrid::for_exactness(24);
        let field = FieldSamples::from_fn(&grid, |z, phi| {
            0.3 + z * z + (2.0 * phi).cos() * (1.0 - z * z)
        });
        let coeffs = analyze(&field, &grid, 8);
        for l in 0..=8 {
            assert_eq!(coeffs.get(l, 0).im, 0.0, "l = {l}");
        }
    }

    #[test]
    fn coefficient_fold_matches_reality_condition() {
        let mut c = HarmonicCoeffs::zeros(3);
        c.set(2, 1, Complex64::new(0.5, -0.25));
        let folded = c.coeff(2, -1);
        assert_eq!(folded, -Complex64::new(0.5, 0.25));
        assert_eq!(c.coeff(2, 1), Complex64::new(0.5, -0.25));
    }

    #[test]
    fn single_harmonic_synthesizes_to_its_own_analysis() {
        // A lone (l, m) = (4, 2) coefficient survives the trip on a grid
        // that is generous for degree 4.
        let mut c = HarmonicCoeffs::zeros(6);
        c.set(4, 2, Complex64::new(1.0, 2.0));
        let grid = SphereGrid::for_exactness(20);
        let field = synthesize(&c, &grid);
        let back = analyze(&field, &grid, 6);
        for l in 0..=6 {
            for m in 0..=l {
                let want = c.get(l, m);
                let got = back.get(l, m);
                assert!((want - got).norm() < 1e-12, "({l},{m}): {got}");
            }
        }
    }
}
