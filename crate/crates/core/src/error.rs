//! Crate-wide error type.

use alloc::boxed::Box;
use core::fmt;

/// Errors reported by the numerical routines.
///
/// Domain violations are programming errors at the call site; the numerical
/// variants (`RankDeficient`, `NotPositiveDefinite`, `Asymmetry`,
/// `NoConvergence`) report genuine properties of the data that callers may
/// want to react to, e.g. by switching to a regularized solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside its documented domain.
    Domain(&'static str),
    /// Exact-arithmetic evaluation was requested beyond its supported range.
    OracleRange { requested: i64, max_degree: i64 },
    /// Two inputs that must agree in shape or degree do not.
    ShapeMismatch(&'static str),
    /// A requested dense operator would exceed the memory budget.
    SizeBudget {
        required_bytes: u64,
        budget_bytes: u64,
    },
    /// A matrix that must be symmetric (or Hermitian) is not, beyond
    /// tolerance. This indicates an assembly bug upstream, so it is an
    /// error rather than something to silently average away.
    Asymmetry { max_abs: f64, tolerance: f64 },
    /// A triangular solve hit a negligible diagonal entry.
    RankDeficient { column: usize },
    /// A Cholesky pivot was not positive.
    NotPositiveDefinite { pivot: usize },
    /// An iteration failed to reach its target tolerance.
    NoConvergence(&'static str),
    /// An input collection that must be non-empty is empty.
    Empty(&'static str),
    /// A failure in a per-order solve, tagged with the order `m` it
    /// occurred at so callers can report or retry the specific block.
    AtOrder { m: usize, source: Box<Error> },
}

impl Error {
    /// The underlying error with any per-order wrappers peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtOrder { source, .. } => source.root(),
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(what) => write!(f, "argument outside domain: {what}"),
            Error::OracleRange {
                requested,
                max_degree,
            } => write!(
                f,
                "exact evaluation requested at degree {requested}, supported up to {max_degree}"
            ),
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            Error::SizeBudget {
                required_bytes,
                budget_bytes,
            } => write!(
                f,
                "dense operator needs {required_bytes} bytes, budget is {budget_bytes}"
            ),
            Error::Asymmetry { max_abs, tolerance } => write!(
                f,
                "matrix asymmetry {max_abs:.3e} exceeds tolerance {tolerance:.3e}; \
                 assembly is inconsistent"
            ),
            Error::RankDeficient { column } => {
                write!(f, "rank deficient: negligible pivot at column {column}")
            }
            Error::NotPositiveDefinite { pivot } => {
                write!(f, "matrix not positive definite at pivot {pivot}")
            }
            Error::NoConvergence(what) => write!(f, "iteration did not converge: {what}"),
            Error::Empty(what) => write!(f, "empty input: {what}"),
            Error::AtOrder { m, source } => write!(f, "order m = {m}: {source}"),
        }
    }
}

impl core::error::Error for Error {}
