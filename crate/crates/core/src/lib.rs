//! Non-unitary joint diagonalization (NUJD) for complex blind source
//! separation.
//!
//! The crate covers three layers:
//!
//! * identifiability certification ([`uniqueness`]): the collinearity
//!   measure over diagonal spectra, exact uniqueness predicates for purely
//!   Hermitian, purely transpose and mixed congruence sets, and explicit
//!   non-uniqueness witnesses (joint diagonalizers outside the
//!   permutation-scaling group);
//! * algebraic solvers ([`solvers`]): the pseudo-uncorrelating transform
//!   (PUT), the strong uncorrelating transform (SUT) and a two-matrix
//!   generalized eigenvalue solver;
//! * estimation and simulation ([`statistics`], [`simulation`]):
//!   covariance-type statistics, cumulant slices and seeded ground-truth
//!   experiments.
//!
//! Batch work (experiment trials, randomized certification) runs on rayon
//! when the default `parallel` feature is enabled and falls back to plain
//! iteration otherwise; see [`parallel`].

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod parallel;
pub mod simulation;
pub mod solvers;
pub mod statistics;
pub mod tol;
pub mod uniqueness;

pub use error::{NujdError, Result};
pub use matrix::{
    apply_congruence, hermitian_skew_split, is_essentially_equivalent, offdiag_residual, pattern_distance,
    ComplexMatrix, CongruenceKind, DiagonalStack, Equivalence, GlElement, GmElement, TaggedMatrix, TaggedMatrixSet,
    C64,
};
