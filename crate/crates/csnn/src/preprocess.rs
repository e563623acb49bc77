//! Image normalization: grayscale conversion, differential heat maps,
//! square crops and max-shrink down to the 31×31 patches every later stage
//! consumes.

use crate::error::{Error, Result};

/// Side length of a normalized patch.
pub const PATCH_SIDE: u32 = 31;

/// A rectangular grid of 8-bit intensities, row-major.
///
/// Carrier for raw monochrome images, heat maps and normalized patches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

/// A heat map has the same representation as any other gray image; the
/// distinction is contractual (see [`heat_map`]).
pub type HeatMap = GrayImage;

impl GrayImage {
    /// Build an image from row-major pixels. Dimensions must be non-zero and
    /// match the pixel count.
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero-sized image ({width}x{height})"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} image needs {expected} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A uniform image of the given intensity.
    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    /// True for the 31×31 shape expected by the spiking pipeline.
    pub fn is_patch(&self) -> bool {
        self.width == PATCH_SIDE && self.height == PATCH_SIDE
    }

    /// Mean intensity over all pixels.
    pub fn mean_brightness(&self) -> f64 {
        let sum: u64 = self.pixels.iter().map(|&p| p as u64).sum();
        sum as f64 / self.pixels.len() as f64
    }
}

/// An axis-aligned object box inside a source image.
///
/// The upper-left corner may be signed: crawled annotations routinely hang
/// over the image edge and are clamped at ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundingBox {
    pub x: i64,
    pub y: i64,
    pub w: u32,
    pub h: u32,
    pub label: String,
}

impl BoundingBox {
    pub fn new(x: i64, y: i64, w: u32, h: u32, label: impl Into<String>) -> Self {
        Self {
            x,
            y,
            w,
            h,
            label: label.into(),
        }
    }

    fn describe(&self) -> String {
        format!("[x={} y={} w={} h={}]", self.x, self.y, self.w, self.h)
    }
}

/// Convert a decoded multi-channel image to grayscale.
///
/// Already-monochrome input passes through unchanged; color input is reduced
/// with the 0.299/0.587/0.114 luma weights, rounded to nearest (ties away
/// from zero).
pub fn to_grayscale(image: &image::DynamicImage) -> Result<GrayImage> {
    let (width, height) = (image.width(), image.height());
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "zero-sized image ({width}x{height})"
        )));
    }
    let pixels = match image {
        image::DynamicImage::ImageLuma8(buf) => buf.as_raw().clone(),
        image::DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| luma(p.0[0], p.0[1], p.0[2]))
            .collect(),
    };
    GrayImage::new(width, height, pixels)
}

#[inline]
fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

/// Differential heat map: per pixel, the root of the summed squared
/// differences against the four axis neighbors, linearly rescaled so the
/// maximum maps to 255.
///
/// Out-of-bounds neighbors count as equal to the center (zero contribution),
/// an all-zero raw map is returned unchanged, and rescaling rounds to nearest
/// with ties away from zero.
pub fn heat_map(img: &GrayImage) -> Result<HeatMap> {
    if img.width < 3 || img.height < 3 {
        return Err(Error::InvalidImage(format!(
            "heat map needs at least 3x3, got {}x{}",
            img.width, img.height
        )));
    }
    let mut raw = vec![0.0f64; img.pixels.len()];
    let mut max = 0.0f64;
    for y in 0..img.height {
        for x in 0..img.width {
            let center = img.get(x, y) as f64;
            let mut sum = 0.0;
            let mut add = |v: f64| {
                let d = v - center;
                sum += d * d;
            };
            if x > 0 {
                add(img.get(x - 1, y) as f64);
            }
            if x + 1 < img.width {
                add(img.get(x + 1, y) as f64);
            }
            if y > 0 {
                add(img.get(x, y - 1) as f64);
            }
            if y + 1 < img.height {
                add(img.get(x, y + 1) as f64);
            }
            let h = sum.sqrt();
            raw[y as usize * img.width as usize + x as usize] = h;
            max = max.max(h);
        }
    }
    let pixels = if max == 0.0 {
        vec![0u8; raw.len()]
    } else {
        raw.iter()
            .map(|&h| (h * 255.0 / max).round() as u8)
            .collect()
    };
    GrayImage::new(img.width, img.height, pixels)
}

/// Cut the smallest axis-aligned square containing `bbox`, centered on the
/// box and shifted (never padded) to stay inside the image.
///
/// Rejected when the box does not intersect the image or the square would
/// not fit inside it.
pub fn crop_square(img: &GrayImage, bbox: &BoundingBox) -> Result<GrayImage> {
    let (iw, ih) = (img.width as i64, img.height as i64);
    let (bw, bh) = (bbox.w as i64, bbox.h as i64);
    let x0 = bbox.x.max(0);
    let y0 = bbox.y.max(0);
    let x1 = (bbox.x + bw).min(iw);
    let y1 = (bbox.y + bh).min(ih);
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::EmptyIntersection(bbox.describe()));
    }
    let side = bw.max(bh);
    if side > iw || side > ih {
        return Err(Error::InvalidImage(format!(
            "square side {side} for box {} exceeds image {}x{}",
            bbox.describe(),
            iw,
            ih
        )));
    }
    // Center the square on the box center, then clamp into the image.
    let left = (bbox.x + (bw - side) / 2).clamp(0, iw - side);
    let top = (bbox.y + (bh - side) / 2).clamp(0, ih - side);
    let side = side as u32;
    let mut pixels = Vec::with_capacity((side * side) as usize);
    for y in 0..side {
        for x in 0..side {
            pixels.push(img.get(left as u32 + x, top as u32 + y));
        }
    }
    GrayImage::new(side, side, pixels)
}

/// Shrink by taking the brightest source pixel projecting onto each output
/// pixel.
///
/// Source pixel (x, y) projects to (floor(x·side/src_w), floor(y·side/src_h)),
/// which partitions the source grid for any downscale ratio. Output pixels
/// left uncovered (only possible when upscaling) stay 0.
pub fn shrink_max(img: &GrayImage, side: u32) -> Result<GrayImage> {
    if side == 0 {
        return Err(Error::InvalidImage("target side must be >= 1".into()));
    }
    let mut out = vec![0u8; side as usize * side as usize];
    let (sw, sh) = (img.width as u64, img.height as u64);
    for y in 0..img.height {
        let oy = (y as u64 * side as u64 / sh) as usize;
        for x in 0..img.width {
            let ox = (x as u64 * side as u64 / sw) as usize;
            let cell = &mut out[oy * side as usize + ox];
            *cell = (*cell).max(img.get(x, y));
        }
    }
    GrayImage::new(side, side, out)
}

/// Full normalization of one annotated object: heat map of the whole frame,
/// square crop around the box, max-shrink to [`PATCH_SIDE`].
pub fn normalize_object(gray: &GrayImage, bbox: &BoundingBox) -> Result<GrayImage> {
    let heat = heat_map(gray)?;
    let crop = crop_square(&heat, bbox)?;
    shrink_max(&crop, PATCH_SIDE)
}
