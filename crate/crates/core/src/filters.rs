//! Forward differences, the TV and MLV guidance maps, their exponentiated
//! forms, and the reciprocal weight maps that regularize the decomposition.
//!
//! Horizontal and vertical derivatives are kept apart: every map here is a
//! [`Directional`] pair and each direction gets its own weight plane.

use crate::error::{Result, StarError};
use crate::image::ImageGrid;

/// A horizontal/vertical pair of equally sized grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Directional {
    pub x: ImageGrid,
    pub y: ImageGrid,
}

impl Directional {
    pub fn new(x: ImageGrid, y: ImageGrid) -> Result<Self> {
        x.check_dims(&y)?;
        Ok(Self { x, y })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.x.dims()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Directional {
        Directional {
            x: self.x.map(&f),
            y: self.y.map(&f),
        }
    }

    /// The pair that belongs to the transposed image: both planes transposed
    /// and the directions swapped.
    pub fn transpose(&self) -> Directional {
        Directional {
            x: self.y.transpose(),
            y: self.x.transpose(),
        }
    }
}

/// Square averaging window of side `2 * radius + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub radius: usize,
}

impl WindowSpec {
    pub const fn new(radius: usize) -> Self {
        Self { radius }
    }

    pub const fn side(&self) -> usize {
        2 * self.radius + 1
    }
}

impl Default for WindowSpec {
    /// 3×3.
    fn default() -> Self {
        Self { radius: 1 }
    }
}

/// Which guidance map feeds the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightKind {
    /// Exponentiated absolute gradient.
    Etv,
    /// Exponentiated absolute local mean of the gradient.
    #[default]
    Emlv,
}

/// Exponents and stabilizer for the structure (`S`) and texture (`T`) maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    pub gamma_s: f64,
    pub gamma_t: f64,
    pub eps_weight: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            gamma_s: 1.5,
            gamma_t: 0.5,
            eps_weight: 1e-4,
        }
    }
}

impl WeightParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_s > 1.0 && self.gamma_s.is_finite()) {
            return Err(StarError::InvalidParameter(format!(
                "gamma_s must exceed 1, got {}",
                self.gamma_s
            )));
        }
        if !(self.gamma_t > 0.0 && self.gamma_t < 1.0) {
            return Err(StarError::InvalidParameter(format!(
                "gamma_t must lie in (0, 1), got {}",
                self.gamma_t
            )));
        }
        if !(self.eps_weight > 0.0 && self.eps_weight.is_finite()) {
            return Err(StarError::InvalidParameter(format!(
                "eps_weight must be positive, got {}",
                self.eps_weight
            )));
        }
        Ok(())
    }
}

/// Forward differences with a zero last column (x) and zero last row (y).
pub fn forward_gradient(g: &ImageGrid) -> Directional {
    let (h, w) = g.dims();
    let d = g.as_slice();
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for r in 0..h {
        let row = r * w;
        for c in 0..w - 1 {
            gx[row + c] = d[row + c + 1] - d[row + c];
        }
        if r + 1 < h {
            for c in 0..w {
                gy[row + c] = d[row + w + c] - d[row + c];
            }
        }
    }
    Directional {
        x: ImageGrid::from_raw_parts(h, w, gx),
        y: ImageGrid::from_raw_parts(h, w, gy),
    }
}

/// `(|∇x g|, |∇y g|)`.
pub fn tv_map(g: &ImageGrid) -> Directional {
    forward_gradient(g).map(f64::abs)
}

/// Mean over the window centered at each pixel, truncated at the borders.
fn box_mean(g: &ImageGrid, radius: usize) -> ImageGrid {
    let (h, w) = g.dims();
    let d = g.as_slice();
    let mut rows = vec![0.0; h * w];
    for r in 0..h {
        let src = &d[r * w..(r + 1) * w];
        for c in 0..w {
            let lo = c.saturating_sub(radius);
            let hi = (c + radius).min(w - 1);
            rows[r * w + c] = src[lo..=hi].iter().sum::<f64>();
        }
    }
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let lo = r.saturating_sub(radius);
        let hi = (r + radius).min(h - 1);
        for c in 0..w {
            let col_lo = c.saturating_sub(radius);
            let col_hi = (c + radius).min(w - 1);
            let count = ((hi - lo + 1) * (col_hi - col_lo + 1)) as f64;
            let mut sum = 0.0;
            for rr in lo..=hi {
                sum += rows[rr * w + c];
            }
            out[r * w + c] = sum / count;
        }
    }
    ImageGrid::from_raw_parts(h, w, out)
}

/// Absolute window mean of each gradient plane.
pub fn mlv_map(g: &ImageGrid, window: WindowSpec) -> Directional {
    if window.radius == 0 {
        return tv_map(g);
    }
    let grad = forward_gradient(g);
    Directional {
        x: box_mean(&grad.x, window.radius).map(f64::abs),
        y: box_mean(&grad.y, window.radius).map(f64::abs),
    }
}

/// Pointwise `m^gamma` for a non-negative map.
pub fn exponentiate_map(m: &ImageGrid, gamma: f64) -> Result<ImageGrid> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(StarError::InvalidParameter(format!(
            "exponent must be positive, got {gamma}"
        )));
    }
    if let Some(i) = m.as_slice().iter().position(|&v| v < 0.0) {
        return Err(StarError::InvalidInput(format!(
            "negative map value {} at pixel {i}",
            m.as_slice()[i]
        )));
    }
    Ok(m.map(|v| v.powf(gamma)))
}

/// Guidance map of the requested kind.
pub fn guidance_map(source: &ImageGrid, kind: WeightKind, window: WindowSpec) -> Directional {
    match kind {
        WeightKind::Etv => tv_map(source),
        WeightKind::Emlv => mlv_map(source, window),
    }
}

/// Per-direction `1 / (map^gamma + eps_weight)`.
///
/// Every entry lies in `(0, 1 / eps_weight]`.
pub fn build_weight(
    source: &ImageGrid,
    gamma: f64,
    eps_weight: f64,
    window: WindowSpec,
    kind: WeightKind,
) -> Result<Directional> {
    if !(eps_weight > 0.0 && eps_weight.is_finite()) {
        return Err(StarError::InvalidParameter(format!(
            "eps_weight must be positive, got {eps_weight}"
        )));
    }
    let map = guidance_map(source, kind, window);
    let weigh = |m: &ImageGrid| -> Result<ImageGrid> {
        Ok(exponentiate_map(m, gamma)?.map(|v| 1.0 / (v + eps_weight)))
    };
    Ok(Directional {
        x: weigh(&map.x)?,
        y: weigh(&map.y)?,
    })
}
