use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("spectral point {re}{im:+}i lies on the support [{lower}, {upper}]")]
    OnSupport {
        re: f64,
        im: f64,
        lower: f64,
        upper: f64,
    },

    #[error("subordination iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("iterate left the upper half-plane (im = {im:.3e})")]
    LeftHalfPlane { im: f64 },

    #[error("real point {0} is not beyond the spectral edge")]
    NotBeyondEdge(f64),

    #[error("no bracket found: {0}")]
    BracketNotFound(String),

    #[error("square-root fit unstable: ratios spread {spread:.3}")]
    FitUnstable { spread: f64 },

    #[error("degenerate partial decomposition at index {index}: |e_i + h_i| = {norm:.3e}")]
    Degenerate { index: usize, norm: f64 },

    #[error("eigensolver failed for sample seed {seed}")]
    Eigensolver { seed: u64 },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
