use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, StarError>;

/// Which unknown a subproblem was solving for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    Illumination,
    Reflectance,
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Illumination => f.write_str("illumination"),
            Variable::Reflectance => f.write_str("reflectance"),
        }
    }
}

#[derive(Debug, Error)]
pub enum StarError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at pixel {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("system matrix is singular or not positive definite")]
    Singular,

    #[error("system of {size} unknowns exceeds the dense limit of {limit}")]
    SizeCapExceeded { size: usize, limit: usize },

    #[error("invalid illuminant: {0}")]
    InvalidIlluminant(String),

    #[error("stage {outer}, iteration {inner}, {variable} update: {source}")]
    Stage {
        outer: usize,
        inner: usize,
        variable: Variable,
        #[source]
        source: Box<StarError>,
    },

    #[error("raw grid format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Codec(#[from] ::image::ImageError),
}

impl StarError {
    /// True for errors caused by the numbers rather than by the caller's input.
    pub fn is_computational(&self) -> bool {
        match self {
            StarError::SolverFailure { .. }
            | StarError::Singular
            | StarError::InvalidIlluminant(_) => true,
            StarError::Stage { source, .. } => source.is_computational(),
            _ => false,
        }
    }
}
