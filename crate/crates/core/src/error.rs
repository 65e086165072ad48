use thiserror::Error;

/// Errors shared across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("geometry violation: {0}")]
    Geometry(String),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("field undefined where required: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Iteration {
        iterations: usize,
        residual: f64,
        /// Best iterate found before giving up.
        best: Box<crate::fields::ScalarField2D>,
    },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
