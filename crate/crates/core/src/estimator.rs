//! Minimum-mean-square-error reconstruction from masked-field
//! coefficients: per-order least-squares solves (Householder QR or a
//! regularized normal-equations path), the covariance-ratio
//! postprocessing step, a grid search for the regularization strength,
//! and the closed-form expected squared error of the optimal estimator.
//!
//! For an axial mask the full system decouples into one real matrix per
//! order `m`; complex right-hand sides are solved as two real problems
//! sharing a single factorization. Reconstruction runs each order
//! independently, so processing order cannot affect the result.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::Error;
use crate::field::{NoiseModel, PowerSpectrum};
use crate::harmonics::HarmonicCoeffs;
use crate::linalg::{cholesky, cholesky_solve, qr_factor, Matrix, QrFactor};
use crate::metrics::coeff_l2_error;
use crate::operator::MaskOperatorBlock;
use crate::Complex64;

/// Default relative threshold on the triangular factor's diagonal below
/// which a block is reported rank deficient.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

/// Which linear solver the reconstruction uses per order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Householder QR least squares; fails loudly on rank deficiency.
    Qr,
    /// Normal equations with ridge term `nu * I`; trades accuracy
    /// (squared conditioning) for unconditional solvability at `nu > 0`.
    Regularized,
}

/// Solver configuration shared by all orders.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub method: SolveMethod,
    /// Diagonal row weights indexed by output degree `j = 0..=j_max`;
    /// `None` means identity. Entries must be positive and finite.
    pub gamma: Option<Vec<f64>>,
    /// Ridge strength for the regularized method; ignored by QR.
    pub nu: f64,
    /// Relative rank threshold for the QR path.
    pub rank_tolerance: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            method: SolveMethod::Qr,
            gamma: None,
            nu: 0.0,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
        }
    }
}

/// Per-order solve summary.
#[derive(Debug, Clone)]
pub struct BlockDiagnostics {
    pub m: usize,
    /// Ratio of extreme triangular-factor diagonal magnitudes — a cheap
    /// lower bound on the weighted block's condition number.
    pub condition: f64,
    /// Weighted residual norm `||Γ^{1/2}(E α − rhs)||₂` of the solved
    /// (column-filtered) system.
    pub residual: f64,
    /// Whether the solve saw a comfortably full-rank system.
    pub rank_ok: bool,
}

/// Output of [`reconstruct`]: the estimate, the pre-shrinkage solution,
/// and per-order diagnostics.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub a_hat: HarmonicCoeffs,
    /// Least-squares solutions per order; `alpha[m][l - m]` is the
    /// degree-`l` entry. Entries of dropped zero-variance columns are 0.
    pub alpha: Vec<Vec<Complex64>>,
    pub diagnostics: Vec<BlockDiagnostics>,
}

fn check_gamma(gamma: Option<&[f64]>, rows: usize) -> Result<(), Error> {
    if let Some(g) = gamma {
        if g.len() != rows {
            return Err(Error::ShapeMismatch(
                "row weights must have one entry per output degree",
            ));
        }
        if g.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::Domain("row weights must be positive and finite"));
        }
    }
    Ok(())
}

/// Scales row `r` by `sqrt(gamma[r])`, or leaves it alone for identity.
fn sqrt_weight(gamma: Option<&[f64]>, r: usize) -> f64 {
    match gamma {
        Some(g) => g[r].sqrt(),
        None => 1.0,
    }
}

/// Factorization input: the block restricted to `keep`ed columns, with
/// rows scaled by the square roots of the weights.
fn weighted_matrix(block: &MaskOperatorBlock, gamma: Option<&[f64]>, keep: &[usize]) -> Matrix {
    Matrix::from_fn(block.rows(), keep.len(), |r, i| {
        sqrt_weight(gamma, r) * block.matrix().get(r, keep[i])
    })
}

fn split_scaled(rhs: &[Complex64], gamma: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let mut re = Vec::with_capacity(rhs.len());
    let mut im = Vec::with_capacity(rhs.len());
    for (r, c) in rhs.iter().enumerate() {
        let s = sqrt_weight(gamma, r);
        re.push(s * c.re);
        im.push(s * c.im);
    }
    (re, im)
}

/// Solves both real systems of one complex right-hand side with a shared
/// factorization.
fn solve_complex(
    factor: &QrFactor,
    rhs: &[Complex64],
    gamma: Option<&[f64]>,
    rank_tolerance: f64,
) -> Result<Vec<Complex64>, Error> {
    let (re, im) = split_scaled(rhs, gamma);
    let xr = factor.solve_ls(&re, rank_tolerance)?;
    let xi = factor.solve_ls(&im, rank_tolerance)?;
    Ok(xr
        .into_iter()
        .zip(xi)
        .map(|(r, i)| Complex64::new(r, i))
        .collect())
}

/// Weighted least-squares solution of one order's system
/// `min ||Γ^{1/2}(E α − rhs)||₂` by Householder QR.
///
/// `gamma` holds one positive weight per row of the block (degrees
/// `m..=j_max`), or `None` for the identity. Rank deficiency at
/// `rank_tolerance` (relative to the largest triangular diagonal) is an
/// error; callers wanting a best-effort answer should switch to
/// [`solve_block_regularized`].
pub fn solve_block_qr(
    block: &MaskOperatorBlock,
    rhs: &[Complex64],
    gamma: Option<&[f64]>,
    rank_tolerance: f64,
) -> Result<Vec<Complex64>, Error> {
    if rhs.len() != block.rows() {
        return Err(Error::ShapeMismatch(
            "right-hand side length must equal the block row count",
        ));
    }
    check_gamma(gamma, block.rows())?;
    if !(rank_tolerance > 0.0) {
        return Err(Error::Domain("rank tolerance must be positive"));
    }
    let keep: Vec<usize> = (0..block.cols()).collect();
    let factor = qr_factor(weighted_matrix(block, gamma, &keep));
    solve_complex(&factor, rhs, gamma, rank_tolerance)
}

/// Ridge-regularized normal-equations solution of one order's system:
/// `(Eᵀ Γ E + ν I) α = Eᵀ Γ rhs`, factored by Cholesky.
///
/// Requires `ν > 0` or a full-rank block; a non-positive pivot (rank
/// deficiency that `ν` fails to lift) is an error.
pub fn solve_block_regularized(
    block: &MaskOperatorBlock,
    rhs: &[Complex64],
    gamma: Option<&[f64]>,
    nu: f64,
) -> Result<Vec<Complex64>, Error> {
    if rhs.len() != block.rows() {
        return Err(Error::ShapeMismatch(
            "right-hand side length must equal the block row count",
        ));
    }
    check_gamma(gamma, block.rows())?;
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Domain("ridge strength nu must be finite and >= 0"));
    }
    let keep: Vec<usize> = (0..block.cols()).collect();
    let (factor, _) = regularized_factor(block, gamma, nu, &keep)?;
    let (re, im) = split_scaled(rhs, gamma);
    let solve = |scaled: &[f64], a: &Matrix| {
        // Eᵀ Γ rhs = Aᵀ (Γ^{1/2} rhs) with A = Γ^{1/2} E.
        cholesky_solve(&factor, &a.tr_matvec(scaled))
    };
    let a = weighted_matrix(block, gamma, &keep);
    let xr = solve(&re, &a);
    let xi = solve(&im, &a);
    Ok(xr
        .into_iter()
        .zip(xi)
        .map(|(r, i)| Complex64::new(r, i))
        .collect())
}

/// Cholesky factor of `Aᵀ A + ν I` for the weighted, column-filtered
/// block, plus the diagonal-ratio condition estimate of the factor.
fn regularized_factor(
    block: &MaskOperatorBlock,
    gamma: Option<&[f64]>,
    nu: f64,
    keep: &[usize],
) -> Result<(Matrix, f64), Error> {
    let a = weighted_matrix(block, gamma, keep);
    let n = a.cols();
    let mut normal = Matrix::zeros(n, n);
    for c1 in 0..n {
        for c2 in c1..n {
            let mut s = 0.0;
            for r in 0..a.rows() {
                s += a.get(r, c1) * a.get(r, c2);
            }
            if c1 == c2 {
                s += nu;
            }
            normal.set(c1, c2, s);
            normal.set(c2, c1, s);
        }
    }
    cholesky(&mut normal)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for k in 0..n {
        let d = normal.get(k, k);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let condition = if n == 0 {
        1.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    };
    Ok((normal, condition))
}

/// Applies the covariance shrinkage `â_{l,m} = C_l/(C_l+N_l) · α_{l,m}`,
/// with the factor defined as 0 where `C_l = 0` (zero prior variance
/// forces a zero estimate). `alpha[m]` holds degrees `m..=l_max`.
pub fn postprocess(
    alpha: &[Vec<Complex64>],
    c: &PowerSpectrum,
    n: &NoiseModel,
) -> Result<HarmonicCoeffs, Error> {
    if alpha.is_empty() {
        return Err(Error::Empty("postprocess needs at least the m = 0 block"));
    }
    let l_max = alpha.len() - 1;
    if c.degree_bound() < l_max {
        return Err(Error::ShapeMismatch(
            "power spectrum is shorter than the coefficient degree bound",
        ));
    }
    let mut a_hat = HarmonicCoeffs::zeros(l_max);
    for (m, block) in alpha.iter().enumerate() {
        if block.len() != l_max - m + 1 {
            return Err(Error::ShapeMismatch(
                "alpha block length must cover degrees m..=l_max",
            ));
        }
        for (i, &value) in block.iter().enumerate() {
            let l = m + i;
            let cl = c.value(l);
            let factor = if cl > 0.0 { cl / (cl + n.value(l)) } else { 0.0 };
            a_hat.set(l, m, factor * value);
        }
    }
    Ok(a_hat)
}

/// Runs the configured solver independently for every order `m`, applies
/// [`postprocess`], and assembles the estimate.
///
/// Degrees with `C_l = 0` are excluded from the QR solve and its rank
/// accounting (their estimates are forced to zero anyway), so a block is
/// only reported rank deficient in the columns that matter. Solver
/// failures are wrapped with the offending order.
///
/// The reality symmetry of the output holds by construction — solving the
/// conjugated system would conjugate the solution because each block is
/// real and the real/imaginary parts are solved separately — and is
/// asserted in debug builds, never enforced.
pub fn reconstruct(
    blocks: &[MaskOperatorBlock],
    data: &[Vec<Complex64>],
    c: &PowerSpectrum,
    n: &NoiseModel,
    config: &EstimatorConfig,
) -> Result<ReconstructionResult, Error> {
    if blocks.is_empty() {
        return Err(Error::Empty("reconstruction needs at least the m = 0 block"));
    }
    if data.len() != blocks.len() {
        return Err(Error::ShapeMismatch(
            "need exactly one right-hand side per operator block",
        ));
    }
    let l_max = blocks[0].l_max();
    let j_max = blocks[0].j_max();
    if blocks.len() != l_max + 1 {
        return Err(Error::ShapeMismatch(
            "need exactly one operator block per order m = 0..=l_max",
        ));
    }
    if c.degree_bound() < l_max {
        return Err(Error::ShapeMismatch(
            "power spectrum is shorter than the operator degree bound",
        ));
    }
    if let Some(g) = config.gamma.as_deref() {
        check_gamma(Some(g), j_max + 1)?;
    }
    if !(config.rank_tolerance > 0.0) {
        return Err(Error::Domain("rank tolerance must be positive"));
    }
    if !(config.nu >= 0.0) || !config.nu.is_finite() {
        return Err(Error::Domain("ridge strength nu must be finite and >= 0"));
    }

    let mut alpha: Vec<Vec<Complex64>> = Vec::with_capacity(blocks.len());
    let mut diagnostics = Vec::with_capacity(blocks.len());
    for (m, block) in blocks.iter().enumerate() {
        if block.m() != m || block.l_max() != l_max || block.j_max() != j_max {
            return Err(Error::ShapeMismatch(
                "operator blocks must share degree bounds and be ordered by m",
            ));
        }
        if data[m].len() != block.rows() {
            return Err(Error::ShapeMismatch(
                "right-hand side length must equal the block row count",
            ));
        }
        let gamma_m = config.gamma.as_deref().map(|g| &g[m..]);
        let (block_alpha, diag) = solve_one_order(block, &data[m], c, gamma_m, config)
            .map_err(|e| Error::AtOrder {
                m,
                source: Box::new(e),
            })?;
        alpha.push(block_alpha);
        diagnostics.push(diag);
    }

    let a_hat = postprocess(&alpha, c, n)?;
    #[cfg(debug_assertions)]
    {
        let scale = a_hat
            .as_slice()
            .iter()
            .fold(0.0_f64, |s, v| s.max(v.norm()));
        for l in 0..=a_hat.l_max() {
            debug_assert!(
                a_hat.get(l, 0).im.abs() <= 1e-12 * scale.max(1.0),
                "zonal estimate failed the reality symmetry"
            );
        }
    }
    Ok(ReconstructionResult {
        a_hat,
        alpha,
        diagnostics,
    })
}

/// Solves one order's system and reports diagnostics. `gamma` is already
/// sliced to the block's rows.
fn solve_one_order(
    block: &MaskOperatorBlock,
    rhs: &[Complex64],
    c: &PowerSpectrum,
    gamma: Option<&[f64]>,
    config: &EstimatorConfig,
) -> Result<(Vec<Complex64>, BlockDiagnostics), Error> {
    let m = block.m();
    let l_max = block.l_max();
    let (alpha, condition, rank_ok) = match config.method {
        SolveMethod::Qr => {
            // Zero-variance degrees are excluded from the solve and from
            // rank accounting; their alpha entries stay zero.
            let keep: Vec<usize> = (m..=l_max)
                .filter(|&l| c.value(l) > 0.0)
                .map(|l| l - m)
                .collect();
            let mut alpha = vec![Complex64::new(0.0, 0.0); block.cols()];
            let condition;
            if keep.is_empty() {
                condition = 1.0;
            } else {
                let factor = qr_factor(weighted_matrix(block, gamma, &keep));
                condition = factor.diag_condition();
                let solved = solve_complex(&factor, rhs, gamma, config.rank_tolerance)?;
                for (&col, value) in keep.iter().zip(solved) {
                    alpha[col] = value;
                }
            }
            (alpha, condition, true)
        }
        SolveMethod::Regularized => {
            let keep: Vec<usize> = (0..block.cols()).collect();
            let (_, condition) = regularized_factor(block, gamma, config.nu, &keep)?;
            let alpha = solve_block_regularized(block, rhs, gamma, config.nu)?;
            let rank_ok = condition.is_finite() && condition < 1.0 / config.rank_tolerance;
            (alpha, condition, rank_ok)
        }
    };
    // Weighted residual of the full (unfiltered) block.
    let image = block.apply_complex(&alpha);
    let mut residual = 0.0;
    for (r, (got, want)) in image.iter().zip(rhs).enumerate() {
        let w = match gamma {
            Some(g) => g[r],
            None => 1.0,
        };
        residual += w * (got - want).norm_sqr();
    }
    Ok((
        alpha,
        BlockDiagnostics {
            m,
            condition,
            residual: residual.sqrt(),
            rank_ok,
        },
    ))
}

/// Evaluates the regularized reconstruction on every `nu` in `grid` and
/// returns the `(nu, error)` pair minimizing the order-folded squared
/// coefficient error against `truth`. Ties keep the earliest grid entry,
/// so the search is deterministic.
///
/// This is an experiment tool: it requires the ground truth, and exists to
/// compare the regularized path against QR at its best.
pub fn grid_search_nu(
    blocks: &[MaskOperatorBlock],
    data: &[Vec<Complex64>],
    c: &PowerSpectrum,
    n: &NoiseModel,
    truth: &HarmonicCoeffs,
    grid: &[f64],
) -> Result<(f64, f64), Error> {
    if grid.is_empty() {
        return Err(Error::Empty("nu grid must contain at least one value"));
    }
    let mut best: Option<(f64, f64)> = None;
    for &nu in grid {
        let config = EstimatorConfig {
            method: SolveMethod::Regularized,
            gamma: None,
            nu,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
        };
        let result = reconstruct(blocks, data, c, n, &config)?;
        let err = coeff_l2_error(&result.a_hat, truth);
        if best.map_or(true, |(_, e)| err < e) {
            best = Some((nu, err));
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Closed-form expected squared error of the optimal estimator for
/// diagonal spectra: `sum_l lambda_l (2l+1) (C_l − C_l²/(C_l+N_l))`,
/// which reduces to `sum_l (2l+1) C_l τ/(1+τ)` for `N = τC` and unit
/// weights. `lambda` gives per-degree weights (`None` = identity) and
/// must cover the spectrum's degree bound.
pub fn theoretical_mse(
    c: &PowerSpectrum,
    n: &NoiseModel,
    lambda: Option<&[f64]>,
) -> Result<f64, Error> {
    if let Some(weights) = lambda {
        if weights.len() != c.degree_bound() + 1 {
            return Err(Error::ShapeMismatch(
                "degree weights must have one entry per spectrum degree",
            ));
        }
    }
    let mut sum = 0.0;
    for l in 0..=c.degree_bound() {
        let cl = c.value(l);
        if cl == 0.0 {
            continue;
        }
        let nl = n.value(l);
        let weight = lambda.map_or(1.0, |w| w[l]);
        sum += weight * (2 * l + 1) as f64 * (cl - cl * cl / (cl + nl));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{
        masked_data_matrix, sample_field, sample_noise, Seed,
    };
    use crate::mask::{mask_coeffs, AxialMaskSpec, MaskCoeffs};
    use crate::operator::build_axial_block;

    const CONSISTENT_TOLERANCE: f64 = 1e-8;
    const CROSS_METHOD_TOLERANCE: f64 = 1e-6;
    const OPTIMALITY_TOLERANCE: f64 = 1e-8;
    const UNIFORM_RECOVERY_TOLERANCE: f64 = 1e-10;

    fn band_mask(degree: usize) -> MaskCoeffs {
        mask_coeffs(
            &AxialMaskSpec::new(10.0_f64.to_radians(), 20.0_f64.to_radians(), degree).unwrap(),
        )
    }

    fn band_blocks(mask: &MaskCoeffs, l_max: usize, j_max: usize) -> Vec<MaskOperatorBlock> {
        (0..=l_max)
            .map(|m| build_axial_block(m, mask, l_max, j_max).unwrap())
            .collect()
    }

    fn flat_spectrum(l_max: usize) -> PowerSpectrum {
        PowerSpectrum::from_values(vec![1.0; l_max + 1]).unwrap()
    }

    #[test]
    fn identity_block_returns_the_rhs() {
        let l_max = 6;
        let mask = MaskCoeffs::uniform(0);
        let block = build_axial_block(2, &mask, l_max, l_max).unwrap();
        let rhs: Vec<Complex64> = (0..block.rows())
            .map(|i| Complex64::new(i as f64 + 1.0, -(i as f64)))
            .collect();
        let alpha = solve_block_qr(&block, &rhs, None, DEFAULT_RANK_TOLERANCE).unwrap();
        for (a, y) in alpha.iter().zip(&rhs) {
            assert!((a - y).norm() < 1e-13);
        }
    }

    #[test]
    fn consistent_systems_recover_the_coefficients() {
        let l_max = 8;
        let j_max = 24;
        let mask = band_mask(16);
        let blocks = band_blocks(&mask, l_max, j_max);
        let spectrum = flat_spectrum(l_max);
        let a = sample_field(&spectrum, &Seed::new(4, "field"));
        let eps = HarmonicCoeffs::zeros(l_max);
        let data = masked_data_matrix(&a, &eps, &blocks).unwrap();
        for m in 0..=l_max {
            let alpha =
                solve_block_qr(&blocks[m], &data[m], None, DEFAULT_RANK_TOLERANCE).unwrap();
            for (i, l) in (m..=l_max).enumerate() {
                let rel = (alpha[i] - a.get(l, m)).norm() / a.get(l, m).norm().max(1e-30);
                assert!(rel < CONSISTENT_TOLERANCE, "m={m} l={l} rel={rel:.3e}");
            }
        }
    }

    #[test]
    fn qr_and_regularized_paths_agree_on_full_rank_blocks() {
        let l_max = 8;
        let mask = band_mask(16);
        let blocks = band_blocks(&mask, l_max, 24);
        let spectrum = flat_spectrum(l_max);
        let a = sample_field(&spectrum, &Seed::new(6, "field"));
        let model = NoiseModel::new(1e-3, spectrum.clone()).unwrap();
        let eps = sample_noise(&model, &Seed::new(6, "noise"));
        let data = masked_data_matrix(&a, &eps, &blocks).unwrap();
        for m in [0usize, 3, 8] {
            let qr = solve_block_qr(&blocks[m], &data[m], None, DEFAULT_RANK_TOLERANCE).unwrap();
            let reg = solve_block_regularized(&blocks[m], &data[m], None, 0.0).unwrap();
            let scale = qr.iter().fold(0.0_f64, |s, v| s.max(v.norm()));
            for (x, y) in qr.iter().zip(&reg) {
                assert!(
                    (x - y).norm() / scale < CROSS_METHOD_TOLERANCE,
                    "m={m} gap {:.3e}",
                    (x - y).norm() / scale
                );
            }
        }
    }

    #[test]
    fn large_ridge_shrinks_alpha_toward_zero() {
        let l_max = 6;
        let mask = band_mask(12);
        let blocks = band_blocks(&mask, l_max, 18);
        let spectrum = flat_spectrum(l_max);
        let a = sample_field(&spectrum, &Seed::new(8, "field"));
        let eps = HarmonicCoeffs::zeros(l_max);
        let data = masked_data_matrix(&a, &eps, &blocks).unwrap();
        let small = solve_block_regularized(&blocks[0], &data[0], None, 1e-12).unwrap();
        let large = solve_block_regularized(&blocks[0], &data[0], None, 1e9).unwrap();
        let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm(&large) < 1e-8 * norm(&small));
    }

    #[test]
    fn postprocess_applies_the_covariance_ratio() {
        let l_max = 3;
        let mut spectrum_values = vec![1.0; l_max + 1];
        spectrum_values[0] = 0.0;
        let c = PowerSpectrum::from_values(spectrum_values).unwrap();
        let alpha: Vec<Vec<Complex64>> = (0..=l_max)
            .map(|m| {
                (m..=l_max)
                    .map(|l| Complex64::new(l as f64 + 1.0, m as f64))
                    .collect()
            })
            .collect();
        // tau = 0: a_hat = alpha wherever C > 0.
        let n0 = NoiseModel::new(0.0, c.clone()).unwrap();
        let identity = postprocess(&alpha, &c, &n0).unwrap();
        assert_eq!(identity.get(2, 1), Complex64::new(3.0, 1.0));
        assert_eq!(identity.get(0, 0), Complex64::new(0.0, 0.0));
        // tau = 1e-2: a_hat = alpha / 1.01.
        let n = NoiseModel::new(1e-2, c.clone()).unwrap();
        let shrunk = postprocess(&alpha, &c, &n).unwrap();
        let expect = Complex64::new(3.0, 1.0) / 1.01;
        assert!((shrunk.get(2, 1) - expect).norm() < 1e-15);
        assert_eq!(shrunk.get(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn uniform_mask_reconstruction_is_exact() {
        let l_max = 6;
        let j_max = 10;
        let mask = MaskCoeffs::uniform(j_max - l_max);
        let blocks = band_blocks(&mask, l_max, j_max);
        let c = PowerSpectrum::tapered(l_max, true);
        let a = sample_field(&c, &Seed::new(12, "field"));
        let eps = HarmonicCoeffs::zeros(l_max);
        let data = masked_data_matrix(&a, &eps, &blocks).unwrap();
        let n = NoiseModel::new(0.0, c.clone()).unwrap();
        let result = reconstruct(&blocks, &data, &c, &n, &EstimatorConfig::default()).unwrap();
        for l in 0..=l_max {
            for m in 0..=l {
                assert!(
                    (result.a_hat.get(l, m) - a.get(l, m)).norm() < UNIFORM_RECOVERY_TOLERANCE
                );
            }
        }
        for d in &result.diagnostics {
            assert!(d.rank_ok);
            assert!(d.condition < 1.0 + 1e-12);
            assert!(d.residual < 1e-12);
        }
    }

    #[test]
    fn implicit_estimator_satisfies_the_optimality_identity() {
        // Feed the estimator the image of (C+N) e_{l',m'} through the
        // operator; the optimal linear estimator must return C e_{l',m'}.
        let l_max = 6;
        let j_max = 18;
        let mask = band_mask(12);
        let blocks = band_blocks(&mask, l_max, j_max);
        let c = PowerSpectrum::tapered(l_max, true);
        let n = NoiseModel::new(1e-2, c.clone()).unwrap();
        let config = EstimatorConfig::default();
        let mut worst = 0.0_f64;
        for m in 0..=l_max {
            for l_src in m..=l_max {
                let mut data: Vec<Vec<Complex64>> = (0..=l_max)
                    .map(|mm| vec![Complex64::new(0.0, 0.0); blocks[mm].rows()])
                    .collect();
                let mut unit = vec![Complex64::new(0.0, 0.0); blocks[m].cols()];
                unit[l_src - m] = Complex64::new(c.value(l_src) + n.value(l_src), 0.0);
                data[m] = blocks[m].apply_complex(&unit);
                let result = reconstruct(&blocks, &data, &c, &n, &config).unwrap();
                for l in 0..=l_max {
                    for mm in 0..=l {
                        let expect = if l == l_src && mm == m {
                            c.value(l)
                        } else {
                            0.0
                        };
                        let gap = (result.a_hat.get(l, mm) - expect).norm();
                        worst = worst.max(gap);
                    }
                }
            }
        }
        assert!(
            worst < OPTIMALITY_TOLERANCE,
            "optimality identity residual {worst:.3e}"
        );
    }

    #[test]
    fn zero_variance_degrees_are_dropped_and_zeroed() {
        let l_max = 8;
        let mask = band_mask(16);
        let blocks = band_blocks(&mask, l_max, 24);
        let c = PowerSpectrum::tapered(l_max, false); // C_0 = C_1 = 0
        let a = sample_field(&c, &Seed::new(14, "field"));
        let eps = HarmonicCoeffs::zeros(l_max);
        let data = masked_data_matrix(&a, &eps, &blocks).unwrap();
        let n = NoiseModel::new(0.0, c.clone()).unwrap();
        let result = reconstruct(&blocks, &data, &c, &n, &EstimatorConfig::default()).unwrap();
        assert_eq!(result.a_hat.get(0, 0), Complex64::new(0.0, 0.0));
        assert_eq!(result.a_hat.get(1, 0), Complex64::new(0.0, 0.0));
        assert_eq!(result.a_hat.get(1, 1), Complex64::new(0.0, 0.0));
        assert_eq!(result.alpha[0][0], Complex64::new(0.0, 0.0));
        for l in 2..=l_max {
            for m in 0..=l {
                let rel =
                    (result.a_hat.get(l, m) - a.get(l, m)).norm() / a.get(l, m).norm().max(1e-30);
                assert!(rel < CONSISTENT_TOLERANCE, "l={l} m={m} rel={rel:.3e}");
            }
        }
    }

    #[test]
    fn processing_order_cannot_change_the_estimate() {
        // Solving the blocks separately, in reverse order, and assembling
        // by hand must give bit-identical results to `reconstruct`.
        let l_max = 8;
        let mask = band_mask(16);
        let blocks = band_blocks(&mask, l_max, 24);
        let c = flat_spectrum(l_max);
        let model = NoiseModel::new(1e-3, c.clone()).unwrap();
        let a = sample_field(&c, &Seed::new(21, "field"));
        let eps = sample_noise(&model, &Seed::new(21, "noise"));
        let data = masked_data_matrix(&a, &eps, &blocks).unwrap();
        let result = reconstruct(&blocks, &data, &c, &model, &EstimatorConfig::default()).unwrap();
        let mut manual: Vec<Vec<Complex64>> = vec![Vec::new(); l_max + 1];
        for m in (0..=l_max).rev() {
            manual[m] =
                solve_block_qr(&blocks[m], &data[m], None, DEFAULT_RANK_TOLERANCE).unwrap();
        }
        let assembled = postprocess(&manual, &c, &model).unwrap();
        assert_eq!(result.a_hat.as_slice(), assembled.as_slice());
    }

    #[test]
    fn gamma_weights_are_validated_and_preserve_consistency() {
        let l_max = 6;
        let j_max = 18;
        let mask = band_mask(12);
        let blocks = band_blocks(&mask, l_max, j_max);
        let c = flat_spectrum(l_max);
        let a = sample_field(&c, &Seed::new(33, "field"));
        let eps = HarmonicCoeffs::zeros(l_max);
        let data = masked_data_matrix(&a, &eps, &blocks).unwrap();
        // Consistent systems are weight-independent.
        let gamma: Vec<f64> = (0..=j_max).map(|j| 1.0 + 0.1 * j as f64).collect();
        for m in [0usize, 4] {
            let plain = solve_block_qr(&blocks[m], &data[m], None, DEFAULT_RANK_TOLERANCE).unwrap();
            let weighted =
                solve_block_qr(&blocks[m], &data[m], Some(&gamma[m..]), DEFAULT_RANK_TOLERANCE)
                    .unwrap();
            let scale = plain.iter().fold(0.0_f64, |s, v| s.max(v.norm()));
            for (x, y) in plain.iter().zip(&weighted) {
                assert!((x - y).norm() / scale < 1e-9);
            }
        }
        // Invalid weights are rejected.
        let bad = vec![-1.0; blocks[0].rows()];
        assert!(matches!(
            solve_block_qr(&blocks[0], &data[0], Some(&bad), DEFAULT_RANK_TOLERANCE),
            Err(Error::Domain(_))
        ));
        let short = vec![1.0; 3];
        assert!(solve_block_qr(&blocks[0], &data[0], Some(&short), DEFAULT_RANK_TOLERANCE).is_err());
    }

    #[test]
    fn rank_deficiency_is_reported_with_the_order() {
        // An all-zero mask gives identically zero blocks: every column is
        // negligible under any tolerance.
        let l_max = 4;
        let mask = MaskCoeffs::from_coefficients(vec![0.0; 5]);
        let blocks = band_blocks(&mask, l_max, 8);
        let c = flat_spectrum(l_max);
        let n = NoiseModel::new(0.0, c.clone()).unwrap();
        let data: Vec<Vec<Complex64>> = blocks
            .iter()
            .map(|b| vec![Complex64::new(1.0, 0.0); b.rows()])
            .collect();
        let err = reconstruct(&blocks, &data, &c, &n, &EstimatorConfig::default()).unwrap_err();
        match &err {
            Error::AtOrder { m, source } => {
                assert_eq!(*m, 0);
                assert!(matches!(**source, Error::RankDeficient { .. }));
            }
            other => panic!("expected a wrapped rank error, got {other:?}"),
        }
        assert!(matches!(err.root(), Error::RankDeficient { .. }));
        // The regularized path shrugs it off and returns zeros... which
        // postprocess keeps as zeros.
        let config = EstimatorConfig {
            method: SolveMethod::Regularized,
            nu: 1e-6,
            ..EstimatorConfig::default()
        };
        let result = reconstruct(&blocks, &data, &c, &n, &config).unwrap();
        assert!(result
            .a_hat
            .as_slice()
            .iter()
            .all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn grid_search_prefers_tiny_nu_on_exact_data() {
        let l_max = 6;
        let mask = band_mask(12);
        let blocks = band_blocks(&mask, l_max, 18);
        let c = flat_spectrum(l_max);
        let n = NoiseModel::new(0.0, c.clone()).unwrap();
        let a = sample_field(&c, &Seed::new(40, "field"));
        let eps = HarmonicCoeffs::zeros(l_max);
        let data = masked_data_matrix(&a, &eps, &blocks).unwrap();
        // Single-value grid returns that value.
        let (nu, _) = grid_search_nu(&blocks, &data, &c, &n, &a, &[3.0]).unwrap();
        assert_eq!(nu, 3.0);
        // On exact data the shrinkage bias grows with nu.
        let errs: Vec<f64> = [1e-15, 1.0, 1e2]
            .iter()
            .map(|&nu| {
                let config = EstimatorConfig {
                    method: SolveMethod::Regularized,
                    nu,
                    ..EstimatorConfig::default()
                };
                let r = reconstruct(&blocks, &data, &c, &n, &config).unwrap();
                coeff_l2_error(&r.a_hat, &a)
            })
            .collect();
        assert!(errs[0] < errs[1] && errs[1] < errs[2], "{errs:?}");
        let (best, err) =
            grid_search_nu(&blocks, &data, &c, &n, &a, &[1e2, 1.0, 1e-15]).unwrap();
        assert_eq!(best, 1e-15);
        assert!((err - errs[0]).abs() <= 1e-12 * errs[0].max(1e-300));
        assert!(matches!(
            grid_search_nu(&blocks, &data, &c, &n, &a, &[]),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn theoretical_mse_matches_the_closed_form() {
        let c = PowerSpectrum::from_values(vec![1.0; 17]).unwrap();
        let zero_noise = NoiseModel::new(0.0, c.clone()).unwrap();
        assert_eq!(theoretical_mse(&c, &zero_noise, None).unwrap(), 0.0);
        let n = NoiseModel::new(1e-2, c.clone()).unwrap();
        // sum_{l<=16} (2l+1) = 289; value = 289 * 0.01 / 1.01.
        let expect = 289.0 * 0.01 / 1.01;
        let got = theoretical_mse(&c, &n, None).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect);
        // Degree weights scale per-degree contributions.
        let mut lambda = vec![0.0; 17];
        lambda[16] = 2.0;
        let weighted = theoretical_mse(&c, &n, Some(&lambda)).unwrap();
        let expect_weighted = 2.0 * 33.0 * 0.01 / 1.01;
        assert!((weighted - expect_weighted).abs() < 1e-12 * expect_weighted);
        assert!(theoretical_mse(&c, &n, Some(&[1.0; 3])).is_err());
    }
}
