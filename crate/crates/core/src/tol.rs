//! Numerical thresholds shared across modules (all relative).

/// Symmetry / Hermiticity tolerance for tagged matrices.
pub const SYM: f64 = 1e-8;
/// Largest allowed imaginary part (relative to the stack scale) in a
/// Hermitian-kind spectrum.
pub const REAL: f64 = 1e-8;
/// Entries below this fraction of the row maximum are treated as zero when
/// recognizing a scaled permutation.
pub const PATTERN: f64 = 1e-6;
/// Largest condition number accepted for an invertible matrix.
pub const KAPPA_MAX: f64 = 1e8;
/// Invertibility floor: singular values below `SIGMA_MIN · σ_max` count as zero.
pub const SIGMA_MIN: f64 = 1e-12;
/// Collinearity / equality tolerance for certifying exact spectra.
pub const RHO: f64 = 1e-10;
/// Default robustness margin for spectra estimated from data.
pub const NOISY_MARGIN: f64 = 1e-3;
/// Residual a shipped non-uniqueness witness must reach on exact spectra.
pub const WITNESS_RESIDUAL: f64 = 1e-10;
/// Smallest pattern distance from the permutation-scaling group a witness must keep.
pub const WITNESS_DISTANCE: f64 = 0.1;
/// Relative eigenvalue gap below which the PUT spectrum is flagged as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-6;
/// Relative eigenvalue gap required by the two-matrix same-kind solver.
pub const GEVD_GAP: f64 = 1e-8;
