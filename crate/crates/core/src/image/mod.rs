//! Pixel grids, color conversion and serialization.

mod codec;
mod color;
mod raw;

pub use codec::{decode_rgb, encode_gray, encode_rgb, load_rgb, save_gray, save_rgb};
pub use color::{hsv_to_rgb, replace_value_channel, rgb_to_hsv, HsvImage, RgbImage};
pub use raw::{read_raw_grid, write_raw_grid, RAW_MAGIC};

use crate::error::{Result, StarError};

/// A `height × width` grid of intensities stored row-major in 64-bit floats.
///
/// Index `r * width + c` is the pixel at row `r`, column `c`; this is also the
/// vectorization order used by every operator in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(StarError::InvalidInput(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        let len = height
            .checked_mul(width)
            .ok_or_else(|| StarError::InvalidInput(format!("{height}x{width} overflows")))?;
        if data.len() != len {
            return Err(StarError::DimensionMismatch {
                expected: format!("{len} values for {height}x{width}"),
                actual: format!("{} values", data.len()),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(StarError::NonFinite { index });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Grid filled with a single value.
    ///
    /// # Panics
    /// If either dimension is zero or `value` is not finite.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        assert!(value.is_finite(), "fill value must be finite");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    /// Builds a grid by evaluating `f(row, col)`.
    ///
    /// # Panics
    /// If either dimension is zero or `f` returns a non-finite value.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                let v = f(r, c);
                assert!(v.is_finite(), "non-finite value at ({r}, {c})");
                data.push(v);
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; grids have at least one pixel.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Wraps a vector produced by an operator on a grid of the same shape.
    pub(crate) fn from_raw_parts(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            height,
            width,
            data,
        }
    }

    pub fn same_dims(&self, other: &ImageGrid) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_dims(&self, other: &ImageGrid) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(StarError::DimensionMismatch {
                expected: format!("{}x{}", self.height, self.width),
                actual: format!("{}x{}", other.height, other.width),
            })
        }
    }

    /// Pointwise map. The result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        assert!(
            data.iter().all(|v| v.is_finite()),
            "map produced a non-finite value"
        );
        Self {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Pointwise combination of two equally sized grids.
    pub fn zip_map(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> Result<ImageGrid> {
        self.check_dims(other)?;
        let data: Vec<f64> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(StarError::NonFinite { index });
        }
        Ok(Self {
            height: self.height,
            width: self.width,
            data,
        })
    }

    pub fn clamp01(&self) -> ImageGrid {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn transpose(&self) -> ImageGrid {
        let (h, w) = self.dims();
        Self::from_fn(w, h, |r, c| self.data[c * w + r])
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Anisotropic total variation: sum of absolute forward differences in
    /// both directions.
    pub fn total_variation(&self) -> f64 {
        let (h, w) = self.dims();
        let mut tv = 0.0;
        for r in 0..h {
            let row = &self.data[r * w..(r + 1) * w];
            for c in 0..w {
                if c + 1 < w {
                    tv += (row[c + 1] - row[c]).abs();
                }
                if r + 1 < h {
                    tv += (self.data[(r + 1) * w + c] - row[c]).abs();
                }
            }
        }
        tv
    }

    /// Largest absolute pointwise difference.
    pub fn max_abs_diff(&self, other: &ImageGrid) -> Result<f64> {
        self.check_dims(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(ImageGrid::new(0, 3, vec![]).is_err());
        assert!(matches!(
            ImageGrid::new(2, 2, vec![0.0; 3]),
            Err(StarError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_non_finite() {
        let err = ImageGrid::new(1, 3, vec![0.0, f64::NAN, 1.0]).unwrap_err();
        assert!(matches!(err, StarError::NonFinite { index: 1 }));
    }

    #[test]
    fn row_major_layout() {
        let g = ImageGrid::from_fn(2, 3, |r, c| (r * 10 + c) as f64);
        assert_eq!(g.as_slice(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(g.get(1, 2), 12.0);
        let t = g.transpose();
        assert_eq!(t.dims(), (3, 2));
        assert_eq!(t.get(2, 1), 12.0);
    }

    #[test]
    fn total_variation_of_ramp() {
        let g = ImageGrid::from_fn(3, 4, |_, c| c as f64);
        // 3 rows × 3 unit horizontal steps
        assert_eq!(g.total_variation(), 9.0);
    }
}
