//! Wigner 3j symbols and Gaunt coefficients.
//!
//! The production path evaluates a whole family of symbols at once by the
//! three-term recurrence in the first angular momentum: two one-directional
//! sweeps (each stable in its own growth region) matched where the forward
//! sweep stops growing, then normalized by the completeness sum rule. This
//! stays accurate far past the point where factorial formulas overflow —
//! degrees in the low thousands are routine.
//!
//! An exact big-integer evaluation of the Racah single-sum form is kept
//! alongside as an oracle for moderate degrees. It shares no code with the
//! recurrence, which is the point: each path checks the other.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use core::f64::consts::PI;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::Error;

/// Largest degree accepted by [`wigner_3j_oracle`]. The exact sum is
/// correct at any degree but its big-integer cost grows quickly; the
/// recurrence path has no such limit.
pub const ORACLE_MAX_DEGREE: i64 = 64;

fn check_triple(l: i64, m: i64) -> Result<(), Error> {
    if l < 0 {
        return Err(Error::Domain("angular momentum degree must be non-negative"));
    }
    if m.abs() > l {
        return Err(Error::Domain("order exceeds degree: |m| > l"));
    }
    Ok(())
}

fn parity(e: i64) -> f64 {
    if e.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Wigner 3j symbol `(l1 l2 l3; m1 m2 m3)` by recurrence.
///
/// Degrees must be non-negative with `|m_i| <= l_i`; violations are domain
/// errors. Selection-rule failures (m-sum, triangle) return exactly `0.0`.
pub fn wigner_3j(l1: i64, l2: i64, l3: i64, m1: i64, m2: i64, m3: i64) -> Result<f64, Error> {
    check_triple(l1, m1)?;
    check_triple(l2, m2)?;
    check_triple(l3, m3)?;
    if m1 + m2 + m3 != 0 {
        return Ok(0.0);
    }
    if l1 < (l2 - l3).abs() || l1 > l2 + l3 {
        return Ok(0.0);
    }
    let (j1min, fam) = three_j_family(l2, l3, m2, m3);
    Ok(fam[(l1 - j1min) as usize])
}

/// The whole family `f(j1) = (j1 l2 l3; -(m2+m3) m2 m3)` for
/// `j1 = j1min ..= l2 + l3`, where `j1min = max(|l2 - l3|, |m2 + m3|)`.
///
/// Three-term recurrence in `j1` (Schulten-Gordon form):
/// `j1 A(j1+1) f(j1+1) + B(j1) f(j1) + (j1+1) A(j1) f(j1-1) = 0` with
/// `A(j1) = sqrt((j1^2-(l2-l3)^2)((l2+l3+1)^2-j1^2)(j1^2-m1^2))` and
/// `B(j1) = (2 j1+1)((m3-m2) j1(j1+1) - m1 (l2(l2+1)-l3(l3+1)))`.
/// Forward from `j1min` is stable while the magnitude grows; backward from
/// `j1max` is stable down through the oscillatory region. The sweeps are
/// matched at the forward turning point, then scaled so that
/// `sum (2 j1+1) f(j1)^2 = 1` with `sign f(j1max) = (-1)^(l2-l3+m2+m3)`.
pub(crate) fn three_j_family(l2: i64, l3: i64, m2: i64, m3: i64) -> (i64, Vec<f64>) {
    debug_assert!(l2 >= 0 && l3 >= 0 && m2.abs() <= l2 && m3.abs() <= l3);
    let m1 = -(m2 + m3);
    let j1min = (l2 - l3).abs().max(m1.abs());
    let j1max = l2 + l3;
    let n = (j1max - j1min + 1) as usize;
    let mut f = vec![0.0_f64; n];
    f[0] = 1.0;

    let dd = ((l2 - l3) * (l2 - l3)) as f64;
    let ss = ((l2 + l3 + 1) * (l2 + l3 + 1)) as f64;
    let mm = (m1 * m1) as f64;
    let a_coef = |j1: i64| -> f64 {
        let x = (j1 * j1) as f64;
        ((x - dd) * (ss - x) * (x - mm)).sqrt()
    };
    let lterm = (l2 * (l2 + 1) - l3 * (l3 + 1)) as f64;
    let mdiff = (m3 - m2) as f64;
    let b_coef = |j1: i64| -> f64 {
        let j1f = j1 as f64;
        (2.0 * j1f + 1.0) * (mdiff * j1f * (j1f + 1.0) - m1 as f64 * lterm)
    };

    if n > 1 {
        // Second value from the boundary form of the recurrence
        // (A(j1min) = 0; for j1min = 0 also B(0) = 0 and the limit is used).
        f[1] = if j1min == 0 {
            -mdiff / a_coef(1) * f[0]
        } else {
            -b_coef(j1min) / (j1min as f64 * a_coef(j1min + 1)) * f[0]
        };
    }

    const BIG: f64 = 1e250;
    const INV_BIG: f64 = 1e-250;

    // Forward sweep until the two-step magnitude stops growing (two-step so
    // the exact zeros of all-even-m families do not end the sweep early).
    let mut fwd_end = n - 1;
    let mut i = 1;
    while i < n - 1 {
        let j1 = j1min + i as i64;
        let next = -(b_coef(j1) * f[i] + (j1 + 1) as f64 * a_coef(j1) * f[i - 1])
            / (j1 as f64 * a_coef(j1 + 1));
        f[i + 1] = next;
        if next.abs() > BIG {
            for v in f[..=i + 1].iter_mut() {
                *v *= INV_BIG;
            }
        }
        i += 1;
        if i >= 2 && f[i].abs() < f[i - 2].abs() {
            fwd_end = i;
            break;
        }
    }

    if fwd_end < n - 1 {
        // Backward sweep from j1max down into the overlap [fwd_end-2, fwd_end].
        let mut g = vec![0.0_f64; n];
        g[n - 1] = 1.0;
        g[n - 2] = -b_coef(j1max) / ((j1max + 1) as f64 * a_coef(j1max)) * g[n - 1];
        let lo = fwd_end.saturating_sub(2);
        let mut k = n - 2;
        while k > lo {
            let j1 = j1min + k as i64;
            let prev = -(j1 as f64 * a_coef(j1 + 1) * g[k + 1] + b_coef(j1) * g[k])
                / ((j1 + 1) as f64 * a_coef(j1));
            g[k - 1] = prev;
            if prev.abs() > BIG {
                for v in g[k - 1..].iter_mut() {
                    *v *= INV_BIG;
                }
            }
            k -= 1;
        }
        // Match at the best-conditioned overlap point: largest |f|, g != 0.
        let mut cands = [fwd_end, fwd_end - 1, lo];
        cands.sort_by(|a, b| {
            f[*b]
                .abs()
                .partial_cmp(&f[*a].abs())
                .expect("family values are finite")
        });
        let s = cands
            .into_iter()
            .find(|&c| g[c] != 0.0)
            .expect("backward sweep cannot vanish on the whole overlap");
        let lambda = f[s] / g[s];
        for idx in s..n {
            f[idx] = lambda * g[idx];
        }
    }

    // Normalize by the completeness sum rule, guarding against overflow in
    // the squares of the unnormalized sweep values.
    let fmax = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut c = 0.0_f64;
    for (idx, v) in f.iter().enumerate() {
        let u = v / fmax;
        c += (2 * (j1min + idx as i64) + 1) as f64 * u * u;
    }
    let mut scale = 1.0 / (fmax * c.sqrt());
    if f[n - 1] * scale * parity(l2 - l3 + m2 + m3) < 0.0 {
        scale = -scale;
    }
    for v in f.iter_mut() {
        *v *= scale;
    }
    (j1min, f)
}

/// Wigner 3j symbol by the exact Racah single-sum in big-integer
/// arithmetic. Bit-for-bit independent of the recurrence path; degrees are
/// limited to [`ORACLE_MAX_DEGREE`].
pub fn wigner_3j_oracle(
    l1: i64,
    l2: i64,
    l3: i64,
    m1: i64,
    m2: i64,
    m3: i64,
) -> Result<f64, Error> {
    check_triple(l1, m1)?;
    check_triple(l2, m2)?;
    check_triple(l3, m3)?;
    let lmax = l1.max(l2).max(l3);
    if lmax > ORACLE_MAX_DEGREE {
        return Err(Error::OracleRange {
            requested: lmax,
            max_degree: ORACLE_MAX_DEGREE,
        });
    }
    if m1 + m2 + m3 != 0 {
        return Ok(0.0);
    }
    if l1 < (l2 - l3).abs() || l1 > l2 + l3 {
        return Ok(0.0);
    }

    let fact = factorial_table((l1 + l2 + l3 + 1) as usize);
    let f = |v: i64| -> &BigInt { &fact[v as usize] };

    // S = sum_t (-1)^t / (t! (l1+l2-l3-t)! (l1-m1-t)! (l2+m2-t)!
    //                     (l3-l2+m1+t)! (l3-l1-m2+t)!)
    let t_lo = 0.max(l2 - l3 - m1).max(l1 - l3 + m2);
    let t_hi = (l1 + l2 - l3).min(l1 - m1).min(l2 + m2);
    let mut s = BigRational::zero();
    let mut t = t_lo;
    while t <= t_hi {
        let denom = f(t)
            * f(l1 + l2 - l3 - t)
            * f(l1 - m1 - t)
            * f(l2 + m2 - t)
            * f(l3 - l2 + m1 + t)
            * f(l3 - l1 - m2 + t);
        let numer = if t.rem_euclid(2) == 0 {
            BigInt::from(1)
        } else {
            BigInt::from(-1)
        };
        s += BigRational::new(numer, denom);
        t += 1;
    }
    if s.is_zero() {
        return Ok(0.0);
    }

    // R = Delta * prod_i (l_i + m_i)! (l_i - m_i)!, with
    // Delta = (l1+l2-l3)! (l1-l2+l3)! (-l1+l2+l3)! / (l1+l2+l3+1)!.
    let r_num = f(l1 + l2 - l3)
        * f(l1 - l2 + l3)
        * f(-l1 + l2 + l3)
        * f(l1 + m1)
        * f(l1 - m1)
        * f(l2 + m2)
        * f(l2 - m2)
        * f(l3 + m3)
        * f(l3 - m3);
    let r = BigRational::new(r_num, f(l1 + l2 + l3 + 1).clone());

    // value^2 = S^2 R, exactly; take the square root once, in extended
    // precision, and attach the sign.
    let square = &s * &s * r;
    let sign = if s.is_positive() { 1.0 } else { -1.0 };
    Ok(sign * parity(l1 - l2 - m3) * sqrt_rational(&square))
}

fn factorial_table(n: usize) -> Vec<BigInt> {
    let mut fact = Vec::with_capacity(n + 1);
    fact.push(BigInt::from(1));
    for i in 1..=n {
        let next = fact.last().expect("non-empty") * BigInt::from(i);
        fact.push(next);
    }
    fact
}

/// `sqrt(q)` for a non-negative rational, accurate to f64 rounding: shift
/// the quotient up by an even power of two until it carries well over 106
/// significant bits, take the integer square root, shift back.
fn sqrt_rational(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    debug_assert!(q.is_positive(), "square of a real is non-negative");
    let n = q.numer();
    let d = q.denom();
    let bits_n = n.bits() as i64;
    let bits_d = d.bits() as i64;
    let k = (0.max(130 - bits_n + bits_d) + 1) / 2 + 1;
    let shifted: BigInt = (n << (2 * k as usize)) / d;
    let root = shifted.sqrt();
    let (_, digits) = root.to_u64_digits();
    debug_assert!(matches!(root.sign(), Sign::Plus));
    // Top 64 bits of the root, then scale by the remaining power of two.
    let nd = digits.len();
    let top = digits[nd - 1];
    let lead = 64 - top.leading_zeros() as i64;
    let mut mant = top as f64;
    let mut exp2 = (nd as i64 - 1) * 64 - k;
    if nd > 1 {
        // Fold in the next word for full f64 precision.
        mant = top as f64 * 2.0_f64.powi(64) + digits[nd - 2] as f64;
        exp2 -= 64;
    }
    let _ = lead;
    mant * 2.0_f64.powi(exp2 as i32)
}

/// Gaunt coefficient `D`: the integral of `conj(Y_{j,mu}) Y_{l,m} Y_{k,nu}`
/// over the sphere,
/// `D = (-1)^mu sqrt((2l+1)(2k+1)(2j+1)/4pi) (l k j; 0 0 0) (l k j; m nu -mu)`.
///
/// Selection-rule violations (`m + nu != mu`, triangle, parity) return
/// exactly `0.0` without touching floating point.
pub fn gaunt(l: i64, m: i64, k: i64, nu: i64, j: i64, mu: i64) -> Result<f64, Error> {
    check_triple(l, m)?;
    check_triple(k, nu)?;
    check_triple(j, mu)?;
    if m + nu != mu || k < (j - l).abs() || k > j + l || (l + k + j).rem_euclid(2) == 1 {
        return Ok(0.0);
    }
    let pref = parity(mu) * (((2 * l + 1) * (2 * k + 1) * (2 * j + 1)) as f64 / (4.0 * PI)).sqrt();
    let a = wigner_3j(l, k, j, 0, 0, 0)?;
    let b = wigner_3j(l, k, j, m, nu, -mu)?;
    Ok(pref * a * b)
}

/// All Gaunt coefficients `D_{l,m; k,0; j,m}` coupling a zonal (order-zero)
/// factor of degree `k` to fixed `(l, m) -> (j, m)`, for every
/// parity-allowed `k` in `[|j-l|, min(j+l, k_max)]`.
///
/// Returned as `(k, D)` pairs in increasing `k`, stepping by 2 (other
/// parities are exactly zero). Both underlying 3j families are computed by
/// a single recurrence sweep each, so the cost is linear in the range.
pub fn gaunt_axial_range(l: i64, j: i64, m: i64, k_max: i64) -> Result<Vec<(i64, f64)>, Error> {
    check_triple(l, m)?;
    check_triple(j, m)?;
    if k_max < 0 {
        return Err(Error::Domain("k_max must be non-negative"));
    }
    let k_lo = (j - l).abs();
    let k_hi = (j + l).min(k_max);
    // First parity-allowed k at or above k_lo: l + j + k must be even.
    let start = if (l + j + k_lo).rem_euclid(2) == 0 {
        k_lo
    } else {
        k_lo + 1
    };
    if k_hi < start {
        return Ok(Vec::new());
    }
    // (l k j; 0 0 0) and (l k j; m 0 -m) as families over k: cyclic
    // permutation puts k in the leading slot, (l k j) -> (k j l).
    let (amin, fam_a) = three_j_family(j, l, 0, 0);
    let (bmin, fam_b) = three_j_family(j, l, -m, m);
    debug_assert_eq!(amin, k_lo);
    debug_assert!(bmin == k_lo, "order-zero coupling starts at |j-l|");
    let base = parity(m) * (((2 * l + 1) * (2 * j + 1)) as f64 / (4.0 * PI)).sqrt();
    let mut out = Vec::with_capacity(((k_hi - start) / 2 + 1) as usize);
    let mut k = start;
    while k <= k_hi {
        let idx = (k - k_lo) as usize;
        let d = base * ((2 * k + 1) as f64).sqrt() * fam_a[idx] * fam_b[idx];
        out.push((k, d));
        k += 2;
    }
    Ok(out)
}
