//! Illuminant estimation from per-channel decompositions and diagonal
//! (von Kries) correction.

use rayon::prelude::*;

use crate::engine::{star_decompose, Decomposition, StarParams};
use crate::error::{Result, StarError};
use crate::image::RgbImage;

/// Per-channel mean illumination `(r, g, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminantEstimate(pub [f64; 3]);

impl IlluminantEstimate {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Unit-length copy.
    pub fn normalized(&self) -> [f64; 3] {
        let n = self.norm();
        self.0.map(|v| v / n)
    }
}

const NAMES: [&str; 3] = ["red", "green", "blue"];

impl IlluminantEstimate {
    /// Mean illumination of each per-channel decomposition.
    pub fn from_decompositions(planes: &[Decomposition; 3]) -> Result<Self> {
        let est = [0, 1, 2].map(|c| planes[c].illumination.mean());
        if let Some(c) = est.iter().position(|&m| !(m > 0.0)) {
            return Err(StarError::InvalidIlluminant(format!(
                "{} mean illumination is {}",
                NAMES[c], est[c]
            )));
        }
        Ok(Self(est))
    }
}

/// Decomposes the red, green and blue planes independently.
///
/// The planes run in parallel; each decomposition is sequential, so the
/// result does not depend on scheduling. A black plane is rejected.
pub fn decompose_planes(img: &RgbImage, params: &StarParams) -> Result<[Decomposition; 3]> {
    let planes = img.planes();
    for (plane, name) in planes.iter().zip(NAMES) {
        if plane.max() <= 0.0 {
            return Err(StarError::InvalidIlluminant(format!(
                "{name} plane is black"
            )));
        }
    }
    let mut out: Vec<Decomposition> = planes
        .par_iter()
        .map(|plane| star_decompose(plane, params))
        .collect::<Result<_>>()?;
    let b = out.pop().expect("three planes");
    let g = out.pop().expect("three planes");
    let r = out.pop().expect("three planes");
    Ok([r, g, b])
}

/// Per-channel mean illumination of independent plane decompositions.
pub fn estimate_illuminant(img: &RgbImage, params: &StarParams) -> Result<IlluminantEstimate> {
    IlluminantEstimate::from_decompositions(&decompose_planes(img, params)?)
}

/// Scales channel `c` by `‖est‖ / (√3 · est_c)`, so a neutral estimate is
/// the identity, and clamps to `[0, 1]`.
pub fn color_correct(img: &RgbImage, est: &IlluminantEstimate) -> Result<RgbImage> {
    if let Some(c) = est.0.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(StarError::InvalidIlluminant(format!(
            "component {c} is {}",
            est.0[c]
        )));
    }
    let norm = est.norm();
    let gains = est.0.map(|e| norm / (3f64.sqrt() * e));
    img.map_planes(|c, plane| plane.map(|v| (v * gains[c]).clamp(0.0, 1.0)))
}

/// Angle between two RGB vectors in degrees.
pub fn angular_error(est: &[f64; 3], truth: &[f64; 3]) -> Result<f64> {
    let norm = |v: &[f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (ne, nt) = (norm(est), norm(truth));
    if !(ne > 0.0 && nt > 0.0 && ne.is_finite() && nt.is_finite()) {
        return Err(StarError::InvalidInput(
            "angular error needs two nonzero finite vectors".into(),
        ));
    }
    let cos = est.iter().zip(truth).map(|(a, b)| a * b).sum::<f64>() / (ne * nt);
    Ok(cos.clamp(-1.0, 1.0).acos().to_degrees())
}
