use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical and algebraic kernels.
#[derive(Debug, Error)]
pub enum ConeError {
    #[error("singular metric: G(0) = {0} must be nonzero")]
    SingularMetric(f64),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("incompatible operands: {0}")]
    Incompatible(String),

    #[error("unsupported symbol: {0}")]
    UnsupportedSymbol(String),

    #[error("incomplete strip: {0}")]
    IncompleteStrip(String),

    #[error("pole of the inverse conormal symbol at z = {z} (root {root} of the conormal polynomial)")]
    Pole { z: Complex64, root: Complex64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contour truncation too short: tail estimate {tail:e} exceeds tolerance {tol:e}")]
    ContourTruncation { tail: f64, tol: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("spectrum list incomplete: {0}")]
    IncompleteSpectrum(String),

    #[error("tail bound {bound:e} exceeds tolerance {tol:e}; raise the eigenvalue cutoff")]
    TailBound { bound: f64, tol: f64 },

    #[error("ill-conditioned fit: condition number {cond:e} > {limit:e}; shrink the basis or widen the t-grid")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = ConeError> = std::result::Result<T, E>;
