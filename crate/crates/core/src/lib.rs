//! Asymptotics of entries of products `M_{k+1}⋯M_{k+n}` of nonnegative 2×2
//! matrices, through the tails `ξ_k` of an associated limit-periodic
//! continued fraction.
//!
//! The crate is organized bottom-up:
//!
//! - [`mat2`]: matrix primitives, eigenvalues and the companion transform;
//! - [`contfrac`]: approximants and certified tails;
//! - [`sequences`]: matrix sequences (analytic models and files);
//! - [`asymptotics`]: the constants ψ/φ and ratio diagnostics;
//! - [`oracle`]: exact rational reference implementations;
//! - [`cli`]: the command-line front end.

// `!(x < 1.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod contfrac;
pub mod error;
pub mod mat2;
pub mod oracle;
pub mod scalar;
pub mod scaled;
pub mod selftest;
pub mod sequences;

pub use asymptotics::{Entry, RatioDiagnostics};
pub use contfrac::{CfCoeffs, TailEstimate, TailOptions};
pub use error::{Error, Result};
pub use mat2::{Eigenpair, Mat2};
pub use scaled::ScaledEntry;
pub use sequences::{MatrixSequence, MatrixSource};
