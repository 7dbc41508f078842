use crate::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("dimension mismatch in {factor}: expected {expected}, found {found}")]
    DimensionMismatch { factor: String, expected: String, found: String },

    #[error("eigenvalue iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("lambda = {lambda} is within {distance:.3e} of eigenvalue {eigenvalue}")]
    Singular { lambda: C64, eigenvalue: C64, distance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix exponential overflowed (norm of op*t = {norm:.3e})")]
    Overflow { norm: f64 },

    #[error("spectrum not in the open right half-plane (eigenvalue {eigenvalue}); translate kI - op first")]
    TranslationRequired { eigenvalue: C64 },

    #[error("eigenvector basis ill-conditioned (cond = {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("identity violated: {identity} residual {residual:.3e} exceeds {tol:.1e}")]
    IdentityViolation { identity: &'static str, residual: f64, tol: f64 },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("pair is not controllable at eigenvalue #{index} ({eigenvalue}), margin {margin:.3e}")]
    Uncontrollable { index: usize, eigenvalue: C64, margin: f64 },

    #[error("time step {step:.3e} does not resolve the fastest mode; need step <= {required:.3e}")]
    Accuracy { step: f64, required: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("synthesis failure: {reason} (Gramian condition {gramian_cond:.3e})")]
    Synthesis { reason: String, gramian_cond: f64 },

    #[error("pole placement missed the targets by {distance:.3e}")]
    Placement { distance: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn mismatch(
        factor: impl Into<String>,
        expected: impl std::fmt::Display,
        found: impl std::fmt::Display,
    ) -> Self {
        Error::DimensionMismatch { factor: factor.into(), expected: expected.to_string(), found: found.to_string() }
    }
}
