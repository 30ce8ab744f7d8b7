//! Small dense linear-algebra kernels.
//!
//! Per-order operator blocks top out at a few thousand rows by a few
//! hundred columns, so plain row-major `f64` storage and textbook
//! algorithms — Householder least squares, Cholesky, cyclic Jacobi for
//! symmetric eigenvalues, one-sided Jacobi for singular values — are fast
//! enough and, more importantly, deterministic. One-sided Jacobi is chosen
//! for singular values because it resolves tiny ones to high relative
//! accuracy, which matters when checking spectral bounds of badly
//! conditioned blocks.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::Error;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build a matrix by evaluating `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Wrap an existing row-major buffer. `data.len()` must be `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, xv) in row.iter().zip(x) {
                acc += a * xv;
            }
            y[r] = acc;
        }
        y
    }

    /// `y = Aᵀ x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            let xv = x[r];
            for (yc, a) in y.iter_mut().zip(row) {
                *yc += a * xv;
            }
        }
        y
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` over a square matrix.
    pub fn max_abs_asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "asymmetry is defined for square matrices");
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Replace the matrix by its symmetric part `(A + Aᵀ)/2` provided the
    /// asymmetry does not exceed `tolerance` (absolute, compared against
    /// the largest entry); larger asymmetry is an assembly bug and fails.
    pub fn symmetrize(&mut self, tolerance: f64) -> Result<(), Error> {
        let asym = self.max_abs_asymmetry();
        let scale = self.max_abs().max(1.0);
        if asym > tolerance * scale {
            return Err(Error::Asymmetry {
                max_abs: asym,
                tolerance: tolerance * scale,
            });
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
        Ok(())
    }
}

/// Householder QR factorization, stored LAPACK-style: `R` in the upper
/// triangle, reflector tails below the diagonal (with implicit unit head).
pub struct QrFactor {
    qr: Matrix,
    beta: Vec<f64>,
}

/// Factor `a` (consumed, `rows >= cols`) as `QR`.
pub fn qr_factor(mut a: Matrix) -> QrFactor {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n, "QR expects at least as many rows as columns");
    let mut beta = vec![0.0; n];
    let mut v = vec![0.0; m];
    for k in 0..n {
        // Householder vector for column k below the diagonal.
        let mut sigma = 0.0;
        for i in (k + 1)..m {
            let x = a.get(i, k);
            sigma += x * x;
        }
        let x0 = a.get(k, k);
        if sigma == 0.0 {
            beta[k] = 0.0; // column already upper triangular (R_kk = x0)
            continue;
        }
        let mu = (x0 * x0 + sigma).sqrt();
        let v0 = if x0 <= 0.0 { x0 - mu } else { -sigma / (x0 + mu) };
        let bk = 2.0 * v0 * v0 / (sigma + v0 * v0);
        beta[k] = bk;
        v[k] = 1.0;
        for i in (k + 1)..m {
            v[i] = a.get(i, k) / v0;
        }
        // Apply H = I - beta v vᵀ to the trailing block (column k included).
        for j in k..n {
            let mut s = 0.0;
            for i in k..m {
                s += v[i] * a.get(i, j);
            }
            let s = bk * s;
            for i in k..m {
                let val = a.get(i, j) - s * v[i];
                a.set(i, j, val);
            }
        }
        // Store the reflector tail where we just wrote near-zeros.
        for i in (k + 1)..m {
            a.set(i, k, v[i]);
        }
    }
    QrFactor { qr: a, beta }
}

impl QrFactor {
    pub fn rows(&self) -> usize {
        self.qr.rows
    }

    pub fn cols(&self) -> usize {
        self.qr.cols
    }

    /// Diagonal of `R`.
    pub fn r_diag(&self) -> Vec<f64> {
        (0..self.qr.cols).map(|k| self.qr.get(k, k)).collect()
    }

    /// Ratio of largest to smallest `|R_kk|` — a cheap lower bound on the
    /// condition number, good enough for diagnostics.
    pub fn diag_condition(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for k in 0..self.qr.cols {
            let d = self.qr.get(k, k).abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Overwrite `rhs` (length `rows`) with `Qᵀ rhs`.
    pub fn apply_qt(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.qr.rows);
        let (m, n) = (self.qr.rows, self.qr.cols);
        for k in 0..n {
            let bk = self.beta[k];
            if bk == 0.0 {
                continue;
            }
            let mut s = rhs[k];
            for i in (k + 1)..m {
                s += self.qr.get(i, k) * rhs[i];
            }
            let s = bk * s;
            rhs[k] -= s;
            for i in (k + 1)..m {
                rhs[i] -= s * self.qr.get(i, k);
            }
        }
    }

    /// Solve `R x = y[..cols]` by back substitution. A diagonal entry below
    /// `rank_tol_rel * max |R_kk|` reports rank deficiency.
    pub fn solve_upper(&self, y: &[f64], rank_tol_rel: f64) -> Result<Vec<f64>, Error> {
        let n = self.qr.cols;
        assert!(y.len() >= n);
        let max_diag = self
            .r_diag()
            .iter()
            .fold(0.0_f64, |m, d| m.max(d.abs()));
        let tol = rank_tol_rel * max_diag;
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let d = self.qr.get(k, k);
            if d.abs() <= tol {
                return Err(Error::RankDeficient { column: k });
            }
            let mut s = y[k];
            for j in (k + 1)..n {
                s -= self.qr.get(k, j) * x[j];
            }
            x[k] = s / d;
        }
        Ok(x)
    }

    /// Least-squares solve `min ||A x - rhs||` for one right-hand side.
    pub fn solve_ls(&self, rhs: &[f64], rank_tol_rel: f64) -> Result<Vec<f64>, Error> {
        let mut y = rhs.to_vec();
        self.apply_qt(&mut y);
        self.solve_upper(&y, rank_tol_rel)
    }
}

/// In-place lower Cholesky factorization of a symmetric positive definite
/// matrix; the strict upper triangle is left untouched.
pub fn cholesky(a: &mut Matrix) -> Result<(), Error> {
    assert_eq!(a.rows, a.cols, "Cholesky needs a square matrix");
    let n = a.rows;
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            let l = a.get(j, k);
            d -= l * l;
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let d = d.sqrt();
        a.set(j, j, d);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= a.get(i, k) * a.get(j, k);
            }
            a.set(i, j, s / d);
        }
    }
    Ok(())
}

/// Solve `L Lᵀ x = b` given the lower factor produced by [`cholesky`].
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    assert_eq!(b.len(), n);
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l.get(i, k) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// The input must already be numerically symmetric; only the upper triangle
/// is trusted as rotation input but both halves are updated.
pub fn symmetric_eigenvalues(mut a: Matrix) -> Result<Vec<f64>, Error> {
    assert_eq!(a.rows, a.cols, "eigenvalues need a square matrix");
    let n = a.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let stop = 1e-15 * scale;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).abs());
            }
        }
        if off <= stop {
            let mut ev: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
            ev.sort_by(|x, y| x.partial_cmp(y).expect("eigenvalues are finite"));
            return Ok(ev);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= stop * 1e-2 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for i in 0..n {
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, c * aip - s * aiq);
                    a.set(i, q, s * aip + c * aiq);
                }
                for i in 0..n {
                    let api = a.get(p, i);
                    let aqi = a.get(q, i);
                    a.set(p, i, c * api - s * aqi);
                    a.set(q, i, s * api + c * aqi);
                }
            }
        }
    }
    Err(Error::NoConvergence("Jacobi eigenvalue sweeps"))
}

/// Singular values by one-sided Jacobi orthogonalization, descending.
///
/// Works on the tall orientation internally; the values of a matrix and its
/// transpose coincide.
pub fn singular_values_jacobi(a: &Matrix) -> Result<Vec<f64>, Error> {
    // Column-major storage of the tall orientation for cache-friendly
    // column rotations.
    let (m, n) = if a.rows >= a.cols {
        (a.rows, a.cols)
    } else {
        (a.cols, a.rows)
    };
    let mut cols: Vec<Vec<f64>> = if a.rows >= a.cols {
        (0..n).map(|j| (0..m).map(|i| a.get(i, j)).collect()).collect()
    } else {
        (0..n).map(|j| (0..m).map(|i| a.get(j, i)).collect()).collect()
    };
    if n == 0 {
        return Ok(Vec::new());
    }
    let tol = 1e-15;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut dp, mut dq, mut off) = (0.0_f64, 0.0_f64, 0.0_f64);
                for i in 0..m {
                    let x = cols[p][i];
                    let y = cols[q][i];
                    dp += x * x;
                    dq += y * y;
                    off += x * y;
                }
                if off.abs() <= tol * (dp * dq).sqrt() || dp == 0.0 || dq == 0.0 {
                    continue;
                }
                rotated = true;
                let theta = (dq - dp) / (2.0 * off);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let (cp, cq) = {
                    let (head, tail) = cols.split_at_mut(q);
                    (&mut head[p], &mut tail[0])
                };
                for i in 0..m {
                    let x = cp[i];
                    let y = cq[i];
                    cp[i] = c * x - s * y;
                    cq[i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            let mut sv: Vec<f64> = cols
                .iter()
                .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect();
            sv.sort_by(|x, y| y.partial_cmp(x).expect("singular values are finite"));
            return Ok(sv);
        }
    }
    Err(Error::NoConvergence("one-sided Jacobi singular value sweeps"))
}

/// Eigenvalues of a Hermitian matrix `H = A + iB` (given as real and
/// imaginary parts) via the real symmetric embedding `[[A, -B], [B, A]]`,
/// whose spectrum is that of `H` with every multiplicity doubled.
pub fn hermitian_eigenvalues(re: &Matrix, im: &Matrix) -> Result<Vec<f64>, Error> {
    assert_eq!(re.rows, re.cols);
    assert_eq!(im.rows, im.cols);
    assert_eq!(re.rows, im.rows, "real and imaginary parts must agree in shape");
    let n = re.rows;
    let mut big = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let a = re.get(i, j);
            let b = im.get(i, j);
            big.set(i, j, a);
            big.set(n + i, n + j, a);
            big.set(i, n + j, -b);
            big.set(n + i, j, b);
        }
    }
    let ev = symmetric_eigenvalues(big)?;
    // Fold the doubled spectrum: adjacent sorted pairs are the same
    // eigenvalue up to roundoff.
    let folded = (0..n).map(|i| 0.5 * (ev[2 * i] + ev[2 * i + 1])).collect();
    Ok(folded)
}
