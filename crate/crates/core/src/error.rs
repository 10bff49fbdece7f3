use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates a documented invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The Fock truncation is too small for the requested state.
    #[error("truncation inadequate: {what} needs fock_dim >= {required}, have {available}")]
    TruncationRule {
        what: &'static str,
        required: usize,
        available: usize,
    },

    /// Population leaked into the top Fock levels during evolution.
    #[error("truncation failure: top-level population {tail:.3e} >= tolerance {tol:.1e}")]
    TruncationLeak { tail: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    /// A Hermitian expectation value came out with a non-negligible imaginary part.
    #[error("expectation value has imaginary part {0:.3e}; observable is not Hermitian")]
    NotHermitian(f64),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("phase span {span:.3} rad is below the required {required:.3} rad")]
    DegenerateSpan { span: f64, required: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("extent insufficient: data span {extent:.3e} m is shorter than one wavelength ({wavelength:.3e} m)")]
    ExtentInsufficient { extent: f64, wavelength: f64 },

    #[error("search failed: best |<sigma_z>| = {best:.3e} above tolerance {tol:.1e}")]
    SearchFailed { best: f64, tol: f64 },

    #[error("decode table is not monotone between {lo:.6e} and {hi:.6e}")]
    NonMonotone { lo: f64, hi: f64 },

    #[error("value {value:.6e} lies outside decode domain [{lo:.6e}, {hi:.6e}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("missing reference pairing: {0}")]
    MissingReference(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Wraps a failure at a specific scan grid point.
    #[error("at point (outer = {outer}, phi = {phi}): {source}")]
    AtPoint {
        outer: f64,
        phi: f64,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
