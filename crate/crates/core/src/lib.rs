//! Spectral toolkit for PT-symmetric Hamiltonians of the form `H0 + eps V`.
//!
//! The crate builds truncated oscillator-basis matrices for the 2D coupled
//! oscillator `p1^2 + p2^2 + w1^2 x1^2 + w2^2 x2^2 + i eps x1^r x2^s` and the
//! 1D family `p^2 + x^2 (ix)^eps`, computes their complex spectra, follows
//! eigenvalues across a coupling grid, certifies reality, locates symmetry
//! breaking thresholds and expands eigenvalues in Rayleigh-Schrodinger series.

pub mod basis;
pub mod closed_forms;
pub mod error;
pub mod hamiltonians;
pub mod linalg;
pub mod quadrature;
pub mod rspe;
pub mod scan;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, Spectrum};
pub use num_complex::Complex64;

/// Crate version recorded in output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
