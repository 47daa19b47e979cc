use crate::error::{Result, StarError};
use crate::image::ImageGrid;

/// Three equally sized planes holding red, green and blue intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    red: ImageGrid,
    green: ImageGrid,
    blue: ImageGrid,
}

impl RgbImage {
    pub fn new(red: ImageGrid, green: ImageGrid, blue: ImageGrid) -> Result<Self> {
        red.check_dims(&green)?;
        red.check_dims(&blue)?;
        Ok(Self { red, green, blue })
    }

    /// Gray image with all three planes equal to `plane`.
    pub fn gray(plane: ImageGrid) -> Self {
        Self {
            red: plane.clone(),
            green: plane.clone(),
            blue: plane,
        }
    }

    pub fn red(&self) -> &ImageGrid {
        &self.red
    }

    pub fn green(&self) -> &ImageGrid {
        &self.green
    }

    pub fn blue(&self) -> &ImageGrid {
        &self.blue
    }

    pub fn planes(&self) -> [&ImageGrid; 3] {
        [&self.red, &self.green, &self.blue]
    }

    pub fn into_planes(self) -> [ImageGrid; 3] {
        [self.red, self.green, self.blue]
    }

    pub fn dims(&self) -> (usize, usize) {
        self.red.dims()
    }

    /// Applies `f` to every plane.
    pub fn map_planes(&self, mut f: impl FnMut(usize, &ImageGrid) -> ImageGrid) -> Result<Self> {
        Self::new(f(0, &self.red), f(1, &self.green), f(2, &self.blue))
    }
}

/// Hue (fraction of a turn in `[0, 1)`), saturation and value planes.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvImage {
    hue: ImageGrid,
    saturation: ImageGrid,
    value: ImageGrid,
}

impl HsvImage {
    pub fn new(hue: ImageGrid, saturation: ImageGrid, value: ImageGrid) -> Result<Self> {
        hue.check_dims(&saturation)?;
        hue.check_dims(&value)?;
        Ok(Self {
            hue,
            saturation,
            value,
        })
    }

    pub fn hue(&self) -> &ImageGrid {
        &self.hue
    }

    pub fn saturation(&self) -> &ImageGrid {
        &self.saturation
    }

    pub fn value(&self) -> &ImageGrid {
        &self.value
    }

    pub fn dims(&self) -> (usize, usize) {
        self.value.dims()
    }
}

/// Hexcone RGB → HSV for one pixel. Hue is 0 on the gray axis.
pub(crate) fn rgb_to_hsv_pixel(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let chroma = max - min;
    let saturation = if max > 0.0 { chroma / max } else { 0.0 };
    if chroma <= 0.0 {
        return (0.0, saturation, max);
    }
    let sector = if max == r {
        ((g - b) / chroma).rem_euclid(6.0)
    } else if max == g {
        (b - r) / chroma + 2.0
    } else {
        (r - g) / chroma + 4.0
    };
    let mut hue = sector / 6.0;
    if hue >= 1.0 {
        hue -= 1.0;
    }
    (hue, saturation, max)
}

pub(crate) fn hsv_to_rgb_pixel(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as i64 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

pub fn rgb_to_hsv(img: &RgbImage) -> HsvImage {
    let (h, w) = img.dims();
    let n = h * w;
    let (mut hue, mut sat, mut val) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let (r, g, b) = (
        img.red.as_slice(),
        img.green.as_slice(),
        img.blue.as_slice(),
    );
    for i in 0..n {
        let (hh, ss, vv) = rgb_to_hsv_pixel(r[i], g[i], b[i]);
        hue.push(hh);
        sat.push(ss);
        val.push(vv);
    }
    HsvImage {
        hue: ImageGrid::from_raw_parts(h, w, hue),
        saturation: ImageGrid::from_raw_parts(h, w, sat),
        value: ImageGrid::from_raw_parts(h, w, val),
    }
}

pub fn hsv_to_rgb(img: &HsvImage) -> Result<RgbImage> {
    let (h, w) = img.dims();
    let n = h * w;
    let (hue, sat, val) = (
        img.hue.as_slice(),
        img.saturation.as_slice(),
        img.value.as_slice(),
    );
    if let Some(i) = hue.iter().position(|x| !(0.0..1.0).contains(x)) {
        return Err(StarError::InvalidInput(format!(
            "hue {} at pixel {i} outside [0, 1)",
            hue[i]
        )));
    }
    if let Some(i) = sat.iter().position(|x| !(0.0..=1.0).contains(x)) {
        return Err(StarError::InvalidInput(format!(
            "saturation {} at pixel {i} outside [0, 1]",
            sat[i]
        )));
    }
    let (mut r, mut g, mut b) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for i in 0..n {
        let (rr, gg, bb) = hsv_to_rgb_pixel(hue[i], sat[i], val[i]);
        r.push(rr);
        g.push(gg);
        b.push(bb);
    }
    Ok(RgbImage {
        red: ImageGrid::from_raw_parts(h, w, r),
        green: ImageGrid::from_raw_parts(h, w, g),
        blue: ImageGrid::from_raw_parts(h, w, b),
    })
}

/// Swaps in a new value plane, clamped to `[0, 1]`.
pub fn replace_value_channel(hsv: &HsvImage, value: &ImageGrid) -> Result<HsvImage> {
    hsv.value.check_dims(value)?;
    Ok(HsvImage {
        hue: hsv.hue.clone(),
        saturation: hsv.saturation.clone(),
        value: value.clamp01(),
    })
}
