//! Structure and texture aware Retinex decomposition.
//!
//! An observed image `O` is split into a piece-wise smooth illumination
//! layer `I` and a detailed reflectance layer `R` with `O = I ⊙ R`. The
//! split minimizes
//!
//! ```text
//! ‖O − I⊙R‖² + α‖S⊙∇I‖² + β‖T⊙∇R‖²
//! ```
//!
//! where `S` (structure map) and `T` (texture map) are reciprocals of
//! exponentiated local derivatives. Each half of the alternating scheme is a
//! sparse symmetric positive definite least-squares system solved
//! matrix-free with preconditioned conjugate gradients.
//!
//! Module map:
//!
//! - [`image`]: the [`ImageGrid`] carrier, HSV conversion, PNG/JPEG codecs
//!   and the raw `STARF32` dump format.
//! - [`filters`]: forward differences, TV/MLV maps and weight maps.
//! - [`solver`]: the gradient operator and the subproblem solver.
//! - [`engine`]: the alternating decomposition, low-light enhancement and
//!   illuminant estimation.
//! - `oracle` (feature `oracle`): dense brute-force references for tests.

pub mod engine;
pub mod error;
pub mod filters;
pub mod image;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod solver;

pub use crate::engine::{
    angular_error, color_correct, enhance_lowlight, estimate_illuminant, objective, star_decompose,
    star_inner, Decomposition, Enhancement, IlluminantEstimate, InnerIteration, StarParams,
};
pub use crate::error::{Result, StarError};
pub use crate::filters::{Directional, WeightKind, WindowSpec};
pub use crate::image::{HsvImage, ImageGrid, RgbImage};
pub use crate::solver::{
    DiagonalWeights, GradientOperator, Preconditioner, SolveMethod, SolverSettings,
};
