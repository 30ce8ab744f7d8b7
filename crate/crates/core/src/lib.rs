//! Reconstruction of band-limited fields on the sphere from masked
//! spherical-harmonic data.
//!
//! A real field of degree at most `L` is observed through a multiplicative
//! mask of degree `K`; the observable coefficients up to degree `J` are a
//! linear image of the true ones, with the coupling matrix built from Gaunt
//! coefficients of the mask. This crate provides the pieces of that
//! pipeline:
//!
//! * [`wigner`] — Wigner 3j symbols (recurrence plus an exact big-integer
//!   oracle) and Gaunt coefficients, including whole parity-allowed ranges
//!   at once.
//! * [`harmonics`] — normalized associated Legendre functions,
//!   Gauss-Legendre quadrature, sphere grids, and the synthesis/analysis
//!   transforms.
//! * [`mask`] — the smooth axially symmetric equatorial mask, its zonal
//!   expansion coefficients, and extrema of the truncated expansion.
//! * [`operator`] — per-order coupling blocks for axial masks, the dense
//!   operator for general masks, and their spectra.
//! * [`field`] — power spectra, seeded Gaussian sampling of fields and
//!   noise, and the two routes (matrix and pixel) to masked data.
//! * [`estimator`] — least-squares and regularized per-order solves with
//!   the minimum-mean-square-error spectral filter.
//! * [`metrics`] — quadrature-weighted RMS errors, masked/visible region
//!   splits, and coefficient-space error norms.
//! * [`linalg`] — the small dense kernels (Householder QR, Cholesky,
//!   Jacobi eigenvalues and singular values) the rest of the crate uses.
//!
//! The crate is `no_std`-compatible (`--no-default-features`; allocation
//! is required) so the numerical core can be embedded elsewhere; the
//! companion CLI crate carries all file formats and I/O.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod estimator;
pub mod field;
pub mod harmonics;
pub mod linalg;
pub mod mask;
pub mod metrics;
pub mod operator;
pub mod wigner;

pub use error::Error;

/// Convenient alias used throughout: double-precision complex numbers.
pub type Complex64 = num_complex::Complex<f64>;
