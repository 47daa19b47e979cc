//! 8-bit PNG/JPEG adaptation. Bytes map to `x / 255`; encoding rounds to
//! nearest after clamping to `[0, 1]`. No color management is applied.

use std::path::Path;

use image::{DynamicImage, GrayImage, Luma, Rgb};

use crate::error::Result;
use crate::image::{ImageGrid, RgbImage};

pub fn decode_rgb(img: &DynamicImage) -> RgbImage {
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut planes = [
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    for px in rgb.pixels() {
        for (plane, &byte) in planes.iter_mut().zip(px.0.iter()) {
            plane.push(byte as f64 / 255.0);
        }
    }
    let [r, g, b] = planes;
    RgbImage::new(
        ImageGrid::from_raw_parts(h, w, r),
        ImageGrid::from_raw_parts(h, w, g),
        ImageGrid::from_raw_parts(h, w, b),
    )
    .expect("planes share dimensions")
}

pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    Ok(decode_rgb(&image::open(path)?))
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_rgb(img: &RgbImage) -> image::RgbImage {
    let (h, w) = img.dims();
    let [r, g, b] = img.planes().map(ImageGrid::as_slice);
    image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        Rgb([quantize(r[i]), quantize(g[i]), quantize(b[i])])
    })
}

pub fn encode_gray(grid: &ImageGrid) -> GrayImage {
    let (h, w) = grid.dims();
    let data = grid.as_slice();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([quantize(data[y as usize * w + x as usize])])
    })
}

/// Writes an RGB image; the format follows the file extension.
pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    encode_rgb(img).save(path)?;
    Ok(())
}

pub fn save_gray(grid: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    encode_gray(grid).save(path)?;
    Ok(())
}
