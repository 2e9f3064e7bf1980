//! Weak Musielak–Orlicz Hardy spaces for martingales, computed exactly on
//! finite filtered probability spaces.
//!
//! The crate provides:
//!
//! - [`filtration`]: finite probability spaces, refining partition chains,
//!   conditional expectation, martingales, stopping times, and a seeded
//!   deterministic martingale generator;
//! - [`musielak`]: Musielak–Orlicz functions `φ(x, t)`, the weak quasi-norm,
//!   the Luxemburg norm of indicators, modulars, and `L^q_φ` norms;
//! - [`operators`]: maximal and square functions, minimal predictable
//!   envelopes, the five weak Hardy space norms, and sublinearity checks;
//! - [`weights`]: `A_q` and weight-regularity conditions for the conditional
//!   expectations of `φ`;
//! - [`atomic`]: constructive atomic decompositions with exact
//!   reconstruction, atom validation, and decomposition quasi-norms;
//! - [`verify`]: empirical verification harnesses that measure every
//!   hypothesis before asserting an inequality, plus convergence experiments.
//!
//! Everything is deterministic: random inputs come from ChaCha8 keyed by an
//! explicit seed, and reports serialize to identical JSON bytes across runs.

pub mod error;
pub mod filtration;
pub mod atomic;
pub mod musielak;
pub mod operators;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
