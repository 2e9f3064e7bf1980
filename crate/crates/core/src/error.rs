//! Crate-wide error type.
//!
//! Construction-time validation (probability vectors, refinement chains,
//! measurability, martingale property) and operation preconditions all fail
//! through [`Error`]; numerical routines themselves are total once their
//! inputs validate.

use thiserror::Error;

/// Errors produced by constructors and operations in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A probability vector was empty, contained a non-positive or non-finite
    /// entry, or did not sum to 1 within tolerance.
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    /// A partition chain failed to validate (wrong root, empty atom, point
    /// missing or duplicated, or a later level not refining an earlier one).
    #[error("invalid filtration: {0}")]
    InvalidFiltration(String),

    /// Per-point values are not constant on the atoms of the level they are
    /// claimed to be measurable with respect to.
    #[error("not measurable: {0}")]
    NotMeasurable(String),

    /// A process violates the martingale property (f_0 = 0 and
    /// E_n f_{n+1} = f_n within tolerance).
    #[error("not a martingale: {0}")]
    NotMartingale(String),

    /// Level sets of a stopping time are not unions of atoms of the
    /// corresponding level.
    #[error("invalid stopping time: {0}")]
    InvalidStoppingTime(String),

    /// Two objects built over different filtrations (or spaces of different
    /// sizes) were combined.
    #[error("filtration mismatch: {0}")]
    FiltrationMismatch(String),

    /// A scalar or vector parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An operation's mathematical precondition does not hold for the given
    /// inputs (e.g. weight-condition or regularity gates).
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
