//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong between basis construction and result I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Modal degree below the minimum of 2.
    #[error("invalid degree N = {0}: need N >= 2")]
    InvalidDegree(usize),

    /// Only 1D and 2D tensor-product domains are assembled.
    #[error("unsupported dimension {0}: need 1 or 2")]
    UnsupportedDim(usize),

    /// Vector or matrix length does not match the system layout.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An iterative node or root computation did not reach tolerance.
    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    /// Factorization of the shifted normal matrix failed after retries.
    #[error("linear solve failure")]
    LinearSolveFailure,

    /// Deflation factor requested exactly at a deflated root.
    #[error("evaluation at a deflated root (distance below 1e-14)")]
    AtDeflatedRoot,

    /// Noncooperative systems support exponents 2 and 3 only.
    #[error("unsupported exponent p = {0}: need 2 or 3")]
    UnsupportedExponent(f64),

    /// Symmetry transform not declared by the model.
    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),

    /// Refined-degree reference solve did not converge.
    #[error("reference polish failed: {0}")]
    PolishFailed(String),

    /// Config file line could not be parsed.
    #[error("config parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },

    /// Config key not recognized for the selected model.
    #[error("unknown config key `{key}` at line {line}")]
    UnknownKey { line: usize, key: String },

    /// Required config key absent.
    #[error("missing required config key `{0}`")]
    MissingRequired(String),

    /// Underlying file I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
