//! Image and mask containers, normalization, bicubic resampling and PNG I/O.
//!
//! Pixel intensities are `f64` in `[0, 1]`, stored row-major with three
//! interleaved channels. Masks are boolean grids; soft masks hold values in
//! `[0, 1]`.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default side length of the model input.
pub const MODEL_INPUT_SIDE: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image", "width and height must be positive"));
        }
        if data.len() != width * height * 3 {
            return Err(Error::invalid(
                "image",
                format!("buffer holds {} values, expected {}", data.len(), width * height * 3),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid("image", format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image without range checks; values are clamped into `[0, 1]`.
    pub(crate) fn from_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn mean_intensity(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Mean squared error against another image of the same size.
    pub fn mse(&self, other: &RgbImage) -> Result<f64> {
        check_dims(self.dims(), other.dims())?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.data.len() as f64)
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| codec_error(path, e))?.to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
        Self::new(w, h, data)
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
                .expect("buffer length matches dimensions");
        buf.save(path).map_err(|e| codec_error(path, e))
    }

    /// Rounds every intensity to the 8-bit grid, as a PNG round-trip would.
    pub fn quantized(&self) -> RgbImage {
        let data = self.data.iter().map(|&v| f64::from(quantize(v)) / 255.0).collect();
        RgbImage { width: self.width, height: self.height, data }
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn codec_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::Codec {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    mean: [f64; 3],
    std: [f64; 3],
}

impl NormalizationStats {
    /// Channel statistics of the Barrett's WLE training data.
    pub const WLE: NormalizationStats = NormalizationStats {
        mean: [0.64, 0.361, 0.313],
        std: [0.189, 0.156, 0.141],
    };

    pub const IMAGENET: NormalizationStats = NormalizationStats {
        mean: [0.485, 0.456, 0.406],
        std: [0.229, 0.224, 0.225],
    };

    pub fn new(mean: [f64; 3], std: [f64; 3]) -> Result<Self> {
        if std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("normalization stats", format!("std {std:?} must be strictly positive")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("normalization stats", "mean must be finite"));
        }
        Ok(Self { mean, std })
    }

    pub fn mean(&self) -> [f64; 3] {
        self.mean
    }

    pub fn std(&self) -> [f64; 3] {
        self.std
    }
}

/// Channel-normalized image; values are unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

pub fn normalize(image: &RgbImage, stats: &NormalizationStats) -> NormalizedImage {
    let data = image
        .data
        .chunks_exact(3)
        .flat_map(|px| {
            let mut out = [0.0; 3];
            for c in 0..3 {
                out[c] = (px[c] - stats.mean[c]) / stats.std[c];
            }
            out
        })
        .collect();
    NormalizedImage {
        width: image.width,
        height: image.height,
        data,
    }
}

/// Inverse of [`normalize`]. Values are not clamped.
pub fn denormalize(image: &NormalizedImage, stats: &NormalizationStats) -> Vec<f64> {
    image
        .data
        .chunks_exact(3)
        .flat_map(|px| {
            let mut out = [0.0; 3];
            for c in 0..3 {
                out[c] = px[c] * stats.std[c] + stats.mean[c];
            }
            out
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(
                "mask",
                format!("{} bits for {width}x{height}", bits.len()),
            ));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        check_dims(self.dims(), other.dims())?;
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| f(*a, *b)).collect();
        Ok(BinaryMask { width: self.width, height: self.height, bits })
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.zip_with(other, |a, b| a || b)
    }

    /// True when every positive pixel of `self` is positive in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool> {
        check_dims(self.dims(), other.dims())?;
        Ok(self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b))
    }

    /// Reads an 8-bit grayscale PNG where 255 is positive and 0 negative.
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| codec_error(path, e))?.to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut bits = Vec::with_capacity(w * h);
        for (i, v) in img.into_raw().into_iter().enumerate() {
            match v {
                0 => bits.push(false),
                255 => bits.push(true),
                other => {
                    return Err(Error::Codec {
                        path: path.to_path_buf(),
                        message: format!(
                            "binary mask pixel ({}, {}) has value {other}; only 0 and 255 are allowed",
                            i % w,
                            i / w
                        ),
                    })
                }
            }
        }
        Ok(Self { width: w, height: h, bits })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw = self.bits.iter().map(|b| if *b { 255 } else { 0 }).collect();
        let buf: GrayImage = ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length matches dimensions");
        buf.save(path).map_err(|e| codec_error(path, e))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftMask {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SoftMask {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(
                "soft mask",
                format!("{} values for {width}x{height}", values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid("soft mask", format!("value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Positive where the value is at least `threshold`.
    pub fn binarize(&self, threshold: f64) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.values.iter().map(|v| *v >= threshold).collect(),
        }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| codec_error(path, e))?.to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let values = img.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
        Self::new(w, h, values)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw = self.values.iter().map(|&v| quantize(v)).collect();
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
                .expect("buffer length matches dimensions");
        buf.save(path).map_err(|e| codec_error(path, e))
    }
}

impl From<&BinaryMask> for SoftMask {
    fn from(mask: &BinaryMask) -> Self {
        SoftMask {
            width: mask.width,
            height: mask.height,
            values: mask.bits.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

/// Keys cubic convolution kernel with a = -0.5.
fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x < 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        (((x - 5.0) * x + 8.0) * x - 4.0) * A
    } else {
        0.0
    }
}

/// Normalized tap weights for one output axis of a bicubic resample.
struct AxisTaps {
    start: Vec<usize>,
    weights: Vec<Vec<f64>>,
}

fn axis_taps(src_len: usize, origin: f64, extent: f64, out_len: usize) -> AxisTaps {
    let scale = extent / out_len as f64;
    let filter_scale = scale.max(1.0);
    let support = 2.0 * filter_scale;
    let mut start = Vec::with_capacity(out_len);
    let mut weights = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let center = origin + (i as f64 + 0.5) * scale;
        let lo = ((center - support).floor().max(0.0)) as usize;
        let hi = ((center + support).ceil() as usize).min(src_len);
        let (lo, hi) = if lo >= hi {
            // Region outside the source; sample the nearest edge pixel.
            let edge = (center.floor().max(0.0) as usize).min(src_len - 1);
            (edge, edge + 1)
        } else {
            (lo, hi)
        };
        let mut w: Vec<f64> = (lo..hi)
            .map(|j| cubic((j as f64 + 0.5 - center) / filter_scale))
            .collect();
        let total: f64 = w.iter().sum();
        if total.abs() < 1e-12 {
            w = vec![1.0 / (hi - lo) as f64; hi - lo];
        } else {
            w.iter_mut().for_each(|v| *v /= total);
        }
        start.push(lo);
        weights.push(w);
    }
    AxisTaps { start, weights }
}

/// Axis-aligned source rectangle in pixel coordinates (may be fractional).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Region {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Region {
    pub fn full(width: usize, height: usize) -> Self {
        Region { x: 0.0, y: 0.0, width: width as f64, height: height as f64 }
    }
}

/// Bicubic resample of `region` of `image` to `out_w` x `out_h`, antialiased
/// when downscaling.
pub fn resample_bicubic(image: &RgbImage, region: Region, out_w: usize, out_h: usize) -> RgbImage {
    let (w, h) = image.dims();
    let xt = axis_taps(w, region.x, region.width, out_w);
    let yt = axis_taps(h, region.y, region.height, out_h);

    // Horizontal pass over every source row.
    let mut tmp = vec![0.0; h * out_w * 3];
    for y in 0..h {
        let row = &image.data[y * w * 3..(y + 1) * w * 3];
        for ox in 0..out_w {
            let mut acc = [0.0; 3];
            for (k, wt) in xt.weights[ox].iter().enumerate() {
                let sx = xt.start[ox] + k;
                for c in 0..3 {
                    acc[c] += wt * row[sx * 3 + c];
                }
            }
            tmp[(y * out_w + ox) * 3..(y * out_w + ox) * 3 + 3].copy_from_slice(&acc);
        }
    }
    let mut out = vec![0.0; out_h * out_w * 3];
    for oy in 0..out_h {
        for ox in 0..out_w {
            let mut acc = [0.0; 3];
            for (k, wt) in yt.weights[oy].iter().enumerate() {
                let sy = yt.start[oy] + k;
                let base = (sy * out_w + ox) * 3;
                for c in 0..3 {
                    acc[c] += wt * tmp[base + c];
                }
            }
            out[(oy * out_w + ox) * 3..(oy * out_w + ox) * 3 + 3].copy_from_slice(&acc);
        }
    }
    RgbImage::from_clamped(out_w, out_h, out)
}

/// Nearest-neighbour counterpart of [`resample_bicubic`] for masks.
pub fn resample_nearest(mask: &BinaryMask, region: Region, out_w: usize, out_h: usize) -> BinaryMask {
    let (w, h) = mask.dims();
    let sx = region.width / out_w as f64;
    let sy = region.height / out_h as f64;
    BinaryMask::from_fn(out_w, out_h, |x, y| {
        let px = ((region.x + (x as f64 + 0.5) * sx).floor().max(0.0) as usize).min(w - 1);
        let py = ((region.y + (y as f64 + 0.5) * sy).floor().max(0.0) as usize).min(h - 1);
        mask.get(px, py)
    })
}

/// Resizes to `side` x `side` with bicubic interpolation. Same-size input is
/// returned unchanged.
pub fn resize_to_model_input(image: &RgbImage, side: usize) -> RgbImage {
    resize(image, side, side)
}

pub fn resize(image: &RgbImage, width: usize, height: usize) -> RgbImage {
    if image.dims() == (width, height) {
        return image.clone();
    }
    resample_bicubic(image, Region::full(image.width, image.height), width, height)
}

/// Crops an integer rectangle `[x, x+w) x [y, y+h)`.
pub fn crop(image: &RgbImage, x: usize, y: usize, w: usize, h: usize) -> Result<RgbImage> {
    if w == 0 || h == 0 || x + w > image.width || y + h > image.height {
        return Err(Error::invalid(
            "crop",
            format!("rectangle [{x}, {y}, {w}, {h}] outside {}x{}", image.width, image.height),
        ));
    }
    let mut data = Vec::with_capacity(w * h * 3);
    for row in y..y + h {
        let start = (row * image.width + x) * 3;
        data.extend_from_slice(&image.data[start..start + w * 3]);
    }
    Ok(RgbImage { width: w, height: h, data })
}
