//! The masking operator: the linear map sending a field's harmonic
//! coefficients to the harmonic coefficients of the masked field.
//!
//! For an axially symmetric mask the operator never mixes orders, so it is
//! held as one real `(J-m+1) x (L-m+1)` block per order `m`
//! ([`MaskOperatorBlock`]). The dense complex form over all `(l, m)` pairs
//! ([`GeneralOperator`]) exists for small degrees only, where it serves as
//! a cross-check of the block path and of the quadrature oracle.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use core::f64::consts::PI;

use crate::error::Error;
use crate::harmonics::{normalized_assoc_legendre_column, FieldSamples, HarmonicCoeffs, SphereGrid};
use crate::linalg::{
    hermitian_eigenvalues, singular_values_jacobi, symmetric_eigenvalues, Matrix,
};
use crate::mask::MaskCoeffs;
use crate::wigner::{gaunt_axial_range, three_j_family};
use crate::Complex64;

/// Tolerance for the symmetry invariants checked before eigenvalue work.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Default memory budget for the dense general operator (bytes).
pub const DEFAULT_SIZE_BUDGET: u64 = 1 << 28;

/// One order-`m` block of the masking operator for an axial mask:
/// real entries `E^(m)_{j,l}` for `j in [m, J]`, `l in [m, L]`.
#[derive(Debug, Clone)]
pub struct MaskOperatorBlock {
    m: usize,
    l_max: usize,
    j_max: usize,
    matrix: Matrix,
}

impl MaskOperatorBlock {
    /// Reassembles a block from its indices and entry matrix, e.g. when
    /// loading a precomputed operator from disk. The matrix shape must be
    /// `(J - m + 1) x (L - m + 1)`.
    pub fn from_parts(
        m: usize,
        l_max: usize,
        j_max: usize,
        matrix: Matrix,
    ) -> Result<Self, Error> {
        if m > l_max || j_max < l_max {
            return Err(Error::Domain("block indices require m <= L <= J"));
        }
        if matrix.rows() != j_max - m + 1 || matrix.cols() != l_max - m + 1 {
            return Err(Error::ShapeMismatch(
                "block matrix shape must be (J-m+1) x (L-m+1)",
            ));
        }
        Ok(Self {
            m,
            l_max,
            j_max,
            matrix,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    /// Rows: number of output degrees, `J - m + 1`.
    pub fn rows(&self) -> usize {
        self.j_max - self.m + 1
    }

    /// Columns: number of input degrees, `L - m + 1`.
    pub fn cols(&self) -> usize {
        self.l_max - self.m + 1
    }

    /// Entry by absolute degrees `j in [m, J]`, `l in [m, L]`.
    pub fn entry(&self, j: usize, l: usize) -> f64 {
        debug_assert!(j >= self.m && j <= self.j_max && l >= self.m && l <= self.l_max);
        self.matrix.get(j - self.m, l - self.m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// `E^(m) x` for a complex coefficient slice of length `cols()`.
    pub fn apply_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols(), "input slice length mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows()];
        for (r, slot) in out.iter_mut().enumerate() {
            let row = self.matrix.row(r);
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, &e) in row.iter().enumerate() {
                acc += x[c] * e;
            }
            *slot = acc;
        }
        out
    }
}

/// Assemble the order-`m` block `E^(m)_{j,l} = sum_k D_{l,m;k,0;j,m} w_k`.
///
/// Requires `m <= L <= J <= L + K`. Entries with `j + l` odd are exactly
/// zero for the even masks produced by this crate's mask module (their odd
/// `w_k` vanish), and the square part `j, l <= L` is symmetric.
pub fn build_axial_block(
    m: usize,
    w: &MaskCoeffs,
    l_max: usize,
    j_max: usize,
) -> Result<MaskOperatorBlock, Error> {
    if m > l_max {
        return Err(Error::Domain("block order exceeds the input degree bound"));
    }
    if j_max < l_max || j_max > l_max + w.degree() {
        return Err(Error::Domain("output degree bound must lie in [L, L+K]"));
    }
    let rows = j_max - m + 1;
    let cols = l_max - m + 1;
    let mut matrix = Matrix::zeros(rows, cols);
    for j in m..=j_max {
        for l in m..=l_max {
            let range = gaunt_axial_range(l as i64, j as i64, m as i64, w.degree() as i64)?;
            let mut acc = 0.0;
            for (k, d) in range {
                acc += d * w.coeff(k as usize);
            }
            matrix.set(j - m, l - m, acc);
        }
    }
    Ok(MaskOperatorBlock {
        m,
        l_max,
        j_max,
        matrix,
    })
}

/// Singular values of a block, descending. For any mask these are bounded
/// by the truncated mask's maximum absolute value.
pub fn singular_values(block: &MaskOperatorBlock) -> Result<Vec<f64>, Error> {
    singular_values_jacobi(&block.matrix)
}

/// Eigenvalues of a square (`J = L`) block, ascending.
///
/// The block is symmetrized first; asymmetry beyond
/// [`SYMMETRY_TOLERANCE`] (relative) signals an assembly bug rather than
/// being averaged away silently.
pub fn eigenvalues_square(block: &MaskOperatorBlock) -> Result<Vec<f64>, Error> {
    if block.rows() != block.cols() {
        return Err(Error::ShapeMismatch(
            "eigenvalues need a square block (built with J = L)",
        ));
    }
    let mut a = block.matrix.clone();
    a.symmetrize(SYMMETRY_TOLERANCE)?;
    symmetric_eigenvalues(a)
}

/// Dense masking operator over all `(degree, order)` pairs up to `L`
/// (columns) and `J` (rows): complex entries `E_{j,mu;l,m}`.
#[derive(Debug, Clone)]
pub struct GeneralOperator {
    l_max: usize,
    j_max: usize,
    data: Vec<Complex64>,
}

#[inline]
fn pair_index(l: usize, m: i64) -> usize {
    debug_assert!(m.unsigned_abs() as usize <= l);
    (l * (l + 1)) as i64 as usize + (l as i64 + m) as usize - l
}

impl GeneralOperator {
    /// Assemble from the mask's harmonic coefficients (`K = v.l_max()`):
    /// `E_{j,mu;l,m} = sum_k D_{l,m;k,mu-m;j,mu} v_{k,mu-m}`, with the
    /// mask's negative orders folded through its reality symmetry.
    ///
    /// Meant for small degrees; refuses to allocate past `budget` bytes.
    pub fn build_with_budget(
        v: &HarmonicCoeffs,
        l_max: usize,
        j_max: usize,
        budget: u64,
    ) -> Result<Self, Error> {
        let k_max = v.l_max();
        if j_max < l_max || j_max > l_max + k_max {
            return Err(Error::Domain("output degree bound must lie in [L, L+K]"));
        }
        let rows = (j_max + 1) * (j_max + 1);
        let cols = (l_max + 1) * (l_max + 1);
        let required = (rows as u64) * (cols as u64) * core::mem::size_of::<Complex64>() as u64;
        if required > budget {
            return Err(Error::SizeBudget {
                required_bytes: required,
                budget_bytes: budget,
            });
        }
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        for j in 0..=j_max {
            for mu in -(j as i64)..=(j as i64) {
                let row = pair_index(j, mu);
                for l in 0..=l_max {
                    for m in -(l as i64)..=(l as i64) {
                        let col = pair_index(l, m);
                        data[row * cols + col] = general_entry(v, l, m, j, mu, k_max);
                    }
                }
            }
        }
        Ok(GeneralOperator { l_max, j_max, data })
    }

    /// [`Self::build_with_budget`] with the default budget.
    pub fn build(v: &HarmonicCoeffs, l_max: usize, j_max: usize) -> Result<Self, Error> {
        Self::build_with_budget(v, l_max, j_max, DEFAULT_SIZE_BUDGET)
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn rows(&self) -> usize {
        (self.j_max + 1) * (self.j_max + 1)
    }

    pub fn cols(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }

    /// Entry `E_{j,mu;l,m}` with signed orders.
    pub fn entry(&self, j: usize, mu: i64, l: usize, m: i64) -> Complex64 {
        self.data[pair_index(j, mu) * self.cols() + pair_index(l, m)]
    }

    /// Eigenvalues (ascending) of a square `J = L` operator.
    ///
    /// Checks Hermiticity to [`SYMMETRY_TOLERANCE`] (relative) first, then
    /// symmetrizes and diagonalizes via the real embedding.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, Error> {
        if self.j_max != self.l_max {
            return Err(Error::ShapeMismatch(
                "eigenvalues need a square operator (built with J = L)",
            ));
        }
        let n = self.rows();
        let mut scale = 0.0_f64;
        let mut worst = 0.0_f64;
        for r in 0..n {
            for c in 0..n {
                let a = self.data[r * n + c];
                let b = self.data[c * n + r].conj();
                scale = scale.max(a.norm());
                worst = worst.max((a - b).norm());
            }
        }
        if worst > SYMMETRY_TOLERANCE * scale.max(1.0) {
            return Err(Error::Asymmetry {
                max_abs: worst,
                tolerance: SYMMETRY_TOLERANCE * scale.max(1.0),
            });
        }
        let mut re = Matrix::zeros(n, n);
        let mut im = Matrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let h = (self.data[r * n + c] + self.data[c * n + r].conj()) * 0.5;
                re.set(r, c, h.re);
                im.set(r, c, h.im);
            }
        }
        hermitian_eigenvalues(&re, &im)
    }
}

fn general_entry(
    v: &HarmonicCoeffs,
    l: usize,
    m: i64,
    j: usize,
    mu: i64,
    k_max: usize,
) -> Complex64 {
    // Order selection: only the mask order nu = mu - m couples (l, m) to
    // (j, mu); the k range is the triangle intersected with [|nu|, K].
    let nu = mu - m;
    let li = l as i64;
    let ji = j as i64;
    let k_lo = (ji - li).abs().max(nu.abs());
    let k_hi = (ji + li).min(k_max as i64);
    if k_lo > k_hi {
        return Complex64::new(0.0, 0.0);
    }
    // 3j families over the degree slot k (cyclically rotated so k leads):
    // A(k) = (l k j; 0 0 0), B(k) = (l k j; m nu -mu).
    let (a_min, fam_a) = three_j_family(ji, li, 0, 0);
    let (b_min, fam_b) = three_j_family(ji, li, -mu, m);
    let base = if mu.rem_euclid(2) == 0 { 1.0 } else { -1.0 }
        * (((2 * l + 1) * (2 * j + 1)) as f64 / (4.0 * PI)).sqrt();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut k = k_lo;
    // Parity: A(k) vanishes unless l + j + k is even.
    if (li + ji + k).rem_euclid(2) == 1 {
        k += 1;
    }
    while k <= k_hi {
        let a = fam_a[(k - a_min) as usize];
        let b = fam_b[(k - b_min) as usize];
        let d = base * ((2 * k + 1) as f64).sqrt() * a * b;
        acc += v.coeff(k as usize, nu) * d;
        k += 2;
    }
    acc
}

/// Quadrature value of the defining integral
/// `E_{j,mu;l,m} = integral conj(Y_{j,mu}) Y_{l,m} v` from mask samples.
///
/// Test oracle only: exact when the grid integrates combined degree
/// `l + j + mask_degree`, and warns otherwise.
pub fn operator_integral_oracle(
    v_samples: &FieldSamples,
    grid: &SphereGrid,
    mask_degree: usize,
    l: usize,
    m: i64,
    j: usize,
    mu: i64,
) -> Complex64 {
    assert_eq!(
        (v_samples.n_theta(), v_samples.n_phi()),
        (grid.n_theta(), grid.n_phi()),
        "samples and grid shapes differ"
    );
    if grid.exactness() < l + j + mask_degree {
        log::warn!(
            "operator oracle on a grid exact to {}, needs {}",
            grid.exactness(),
            l + j + mask_degree
        );
    }
    let ma = m.unsigned_abs() as usize;
    let mua = mu.unsigned_abs() as usize;
    let n_phi = grid.n_phi();
    let mut acc = Complex64::new(0.0, 0.0);
    for t in 0..grid.n_theta() {
        let z = grid.node(t);
        // Pbar for the two orders, with sign folds for negative input.
        let pl = normalized_assoc_legendre_column(l, ma, z)[l - ma];
        let pj = normalized_assoc_legendre_column(j, mua, z)[j - mua];
        let sign_l = if m < 0 && ma % 2 == 1 { -1.0 } else { 1.0 };
        let sign_j = if mu < 0 && mua % 2 == 1 { -1.0 } else { 1.0 };
        let w = grid.quadrature_weight(t) * pl * pj * sign_l * sign_j;
        // conj(Y_{j,mu}) Y_{l,m} carries e^{i (m - mu) phi}.
        let q = m - mu;
        let mut row_sum = Complex64::new(0.0, 0.0);
        for p in 0..n_phi {
            let phase = q as f64 * 2.0 * PI * p as f64 / n_phi as f64;
            row_sum += v_samples.value(t, p) * Complex64::new(phase.cos(), phase.sin());
        }
        acc += row_sum * w;
    }
    acc
}
