//! Image preparation ahead of feature extraction: uniform-border cropping,
//! text-region filling from an external mask, and 256x256 resampling into
//! the unit range.

use std::path::Path;

use image::{DynamicImage, GenericImageView, RgbImage};

use crate::error::{Error, Result};

/// Side of the square images fed to the extractors.
pub const TARGET_SIZE: u32 = 256;

/// Default per-channel tolerance for "uniform" borders and "white" rings.
pub const DEFAULT_TOLERANCE: u8 = 8;

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::DimensionMismatch {
                expected: "non-empty image".into(),
                actual: format!("{width}x{height}"),
            });
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} samples"),
                actual: format!("{} samples", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| color)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "empty raster");
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, color: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    pub fn crop(&self, rect: Rect) -> RasterImage {
        RasterImage::from_fn(rect.width, rect.height, |x, y| {
            self.pixel(rect.x + x, rect.y + y)
        })
    }

    /// Converts a decoded image, flattening any alpha channel onto white.
    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (width, height) = img.dimensions();
        let rgba = img.to_rgba8();
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for px in rgba.pixels() {
            let a = px[3] as u32;
            for c in 0..3 {
                let v = (px[c] as u32 * a + 255 * (255 - a) + 127) / 255;
                data.push(v as u8);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Reads a PNG or JPEG file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_dynamic(&image::open(path)?))
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        Ok(Self::from_dynamic(&image::load_from_memory(bytes)?))
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("raster length matches its dimensions")
    }

    /// Writes the image; the format follows the file extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_rgb_image().save(path)?;
        Ok(())
    }
}

/// Row-major text mask; `true` marks a text pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl TextMask {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch {
                expected: format!("{} mask entries", width as usize * height as usize),
                actual: format!("{}", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Fraction of pixels marked as text.
    pub fn coverage(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.data.len() as f64
        }
    }

    pub fn crop(&self, rect: Rect) -> TextMask {
        TextMask::from_fn(rect.width, rect.height, |x, y| self.get(rect.x + x, rect.y + y))
    }

    /// Single-channel PNG where any nonzero sample marks text.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        let (width, height) = img.dimensions();
        Ok(Self {
            width,
            height,
            data: img.pixels().map(|p| p[0] != 0).collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let buf = image::GrayImage::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        )
        .expect("mask length matches its dimensions");
        buf.save(path)?;
        Ok(())
    }
}

/// Row-major RGB samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl NormalizedImage {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(Error::DimensionMismatch {
                expected: format!("{} samples", width as usize * height as usize * 3),
                actual: format!("{} samples", data.len()),
            });
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("normalized samples must lie in [0, 1]".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Scales 8-bit samples into `[0, 1]` without resampling.
    pub fn from_raster(img: &RasterImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// ITU-R BT.601 luma, row-major.
    pub fn gray(&self) -> Vec<f32> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

fn within(a: [u8; 3], b: [u8; 3], tolerance: u8) -> bool {
    a.iter().zip(b).all(|(&p, q)| p.abs_diff(q) <= tolerance)
}

/// The color shared by most of the four corners; ties go to the earliest
/// corner in top-left, top-right, bottom-left, bottom-right order.
pub fn corner_majority(img: &RasterImage) -> [u8; 3] {
    let (w, h) = (img.width - 1, img.height - 1);
    let corners = [
        img.pixel(0, 0),
        img.pixel(w, 0),
        img.pixel(0, h),
        img.pixel(w, h),
    ];
    let mut best = corners[0];
    let mut best_count = 0;
    for c in corners {
        let count = corners.iter().filter(|&&o| o == c).count();
        if count > best_count {
            best = c;
            best_count = count;
        }
    }
    best
}

/// Bounding box of the pixels that differ from the corner-majority color by
/// more than `tolerance` on some channel. `None` when the whole image is
/// uniform.
pub fn content_bounds(img: &RasterImage, tolerance: u8) -> Option<Rect> {
    let bg = corner_majority(img);
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for y in 0..img.height {
        for x in 0..img.width {
            if !within(img.pixel(x, y), bg, tolerance) {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    (x0 != u32::MAX).then(|| Rect {
        x: x0,
        y: y0,
        width: x1 - x0 + 1,
        height: y1 - y0 + 1,
    })
}

/// Strips outer rows and columns that lie within `tolerance` of the
/// corner-majority color. A fully uniform image collapses to a single pixel
/// of that color.
pub fn crop_uniform_border(img: &RasterImage, tolerance: u8) -> RasterImage {
    match content_bounds(img, tolerance) {
        Some(rect) => img.crop(rect),
        None => RasterImage::filled(1, 1, corner_majority(img)),
    }
}

/// Which fill the text remover applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillMode {
    /// The mask was empty.
    Untouched,
    /// Every ring pixel was near white, so the mask was painted white.
    White,
    /// Masked pixels took the mean color of the ring around the mask.
    RingMean([u8; 3]),
}

/// Unmasked pixels that touch a masked pixel (8-connectivity).
pub fn mask_ring(mask: &TextMask) -> Vec<(u32, u32)> {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut ring = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x as u32, y as u32) {
                continue;
            }
            let touches = (-1..=1).any(|dy| {
                (-1..=1).any(|dx| {
                    let (nx, ny) = (x + dx, y + dy);
                    (0..w).contains(&nx) && (0..h).contains(&ny) && mask.get(nx as u32, ny as u32)
                })
            });
            if touches {
                ring.push((x as u32, y as u32));
            }
        }
    }
    ring
}

/// Fills masked pixels with the default tolerance.
pub fn fill_text_region(img: &RasterImage, mask: &TextMask) -> Result<RasterImage> {
    fill_text_region_with(img, mask, DEFAULT_TOLERANCE).map(|(img, _)| img)
}

/// Paints masked pixels white when the mask is surrounded by white (all
/// channels at least `255 - tolerance` on every ring pixel), otherwise with
/// the mean ring color. Pixels outside the mask are copied unchanged. A mask
/// with no ring (it covers the image) takes the white path.
pub fn fill_text_region_with(
    img: &RasterImage,
    mask: &TextMask,
    tolerance: u8,
) -> Result<(RasterImage, FillMode)> {
    if img.width != mask.width || img.height != mask.height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} mask", img.width, img.height),
            actual: format!("{}x{}", mask.width, mask.height),
        });
    }
    if mask.count() == 0 {
        return Ok((img.clone(), FillMode::Untouched));
    }
    let ring = mask_ring(mask);
    let white_floor = 255 - tolerance;
    let all_white = ring
        .iter()
        .all(|&(x, y)| img.pixel(x, y).iter().all(|&c| c >= white_floor));
    let (fill, mode) = if all_white {
        ([255; 3], FillMode::White)
    } else {
        let mut sum = [0u64; 3];
        for &(x, y) in &ring {
            for (s, c) in sum.iter_mut().zip(img.pixel(x, y)) {
                *s += c as u64;
            }
        }
        let n = ring.len() as u64;
        let mean = sum.map(|s| ((s + n / 2) / n) as u8);
        (mean, FillMode::RingMean(mean))
    };
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            if mask.get(x, y) {
                out.set_pixel(x, y, fill);
            }
        }
    }
    Ok((out, mode))
}

/// Bilinear resampling with pixel-center alignment and edge clamping,
/// scaling samples into `[0, 1]`.
pub fn resize_bilinear(img: &RasterImage, width: u32, height: u32) -> NormalizedImage {
    let sx = img.width as f64 / width as f64;
    let sy = img.height as f64 / height as f64;
    let axis = |dst: u32, scale: f64, len: u32| {
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let lo = pos.floor() as u32;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, pos - lo as f64)
    };
    let cols: Vec<_> = (0..width).map(|x| axis(x, sx, img.width)).collect();
    let mut data = Vec::with_capacity(width as usize * height as usize * 3);
    for y in 0..height {
        let (y0, y1, fy) = axis(y, sy, img.height);
        for &(x0, x1, fx) in &cols {
            let (a, b) = (img.pixel(x0, y0), img.pixel(x1, y0));
            let (c, d) = (img.pixel(x0, y1), img.pixel(x1, y1));
            for ch in 0..3 {
                let top = a[ch] as f64 * (1.0 - fx) + b[ch] as f64 * fx;
                let bottom = c[ch] as f64 * (1.0 - fx) + d[ch] as f64 * fx;
                let v = (top * (1.0 - fy) + bottom * fy) / 255.0;
                data.push(v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    NormalizedImage {
        width,
        height,
        data,
    }
}

/// Resamples to 256x256 and divides samples by 255.
pub fn resize_normalize(img: &RasterImage) -> NormalizedImage {
    resize_bilinear(img, TARGET_SIZE, TARGET_SIZE)
}
