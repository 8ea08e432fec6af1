use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NujdError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("entries length {len} does not match shape {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not complex symmetric (relative deviation {deviation:.3e})")]
    NotSymmetric { deviation: f64 },

    #[error("matrix is not Hermitian (relative deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("Hermitian-kind spectrum has imaginary part {imag:.3e}; split it first")]
    NonRealSpectrum { imag: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("all spectra are zero")]
    ZeroStack,

    #[error("matrix is singular or too ill-conditioned (condition {condition:.3e})")]
    Singular { condition: f64 },

    #[error("matrix is not a scaled permutation")]
    NotScaledPermutation,

    #[error("matrix is defective (eigenvector condition {condition:.3e})")]
    Defective { condition: f64 },

    #[error("singular pseudo-covariance: singular value {index} is {ratio:.3e} of the largest")]
    SingularPseudoCovariance { index: usize, ratio: f64 },

    #[error("symmetric orthogonalization failed: W^T W is numerically singular (ratio {ratio:.3e})")]
    OrthogonalizationFailure { ratio: f64 },

    #[error("Hermitian matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("second matrix is singular (condition {condition:.3e})")]
    SingularSecondMatrix { condition: f64 },

    #[error("degenerate spectrum: relative eigenvalue gap {gap:.3e}")]
    DegenerateSpectrum { gap: f64 },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("precondition violated: {0}")]
    InvalidPrecondition(String),

    #[error("positions ({k}, {l}) are not collinear (sine {sine:.3e})")]
    NotCollinear { k: usize, l: usize, sine: f64 },

    #[error("pair ({k}, {l}) satisfies the uniqueness condition; no witness exists")]
    ConditionSatisfied { k: usize, l: usize },

    #[error("internal consistency check failed: {0}")]
    SelfCheck(String),

    #[error("identifiability needs at least two sources, got {0}")]
    TooFewSources(usize),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("channel has zero power")]
    ZeroPower,

    #[error("cumulant order {0} unsupported (2..=6)")]
    CumulantOrder(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("JSON error at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, NujdError>;

impl From<serde_json::Error> for NujdError {
    fn from(e: serde_json::Error) -> Self {
        NujdError::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for NujdError {
    fn from(e: std::io::Error) -> Self {
        NujdError::Io(e.to_string())
    }
}
