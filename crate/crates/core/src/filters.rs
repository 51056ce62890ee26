//! Pixel kernels shared by the augmentation and corruption engines.
//!
//! All functions are pure: they take an image and explicit parameters and
//! return a new image with intensities clamped to `[0, 1]`. Borders use
//! clamp-to-edge unless stated otherwise.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::image::{BinaryMask, RgbImage};

/// Luma weights used for grayscale conversion and chroma operations.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

fn luma(px: &[f64]) -> f64 {
    LUMA[0] * px[0] + LUMA[1] * px[1] + LUMA[2] * px[2]
}

fn map_pixels(img: &RgbImage, f: impl Fn([f64; 3]) -> [f64; 3]) -> RgbImage {
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|px| f([px[0], px[1], px[2]]))
        .collect();
    RgbImage::from_clamped(img.width(), img.height(), data)
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlipMode {
    Horizontal,
    Vertical,
    Both,
}

impl FlipMode {
    pub fn from_index(i: usize) -> FlipMode {
        match i {
            0 => FlipMode::Horizontal,
            1 => FlipMode::Vertical,
            _ => FlipMode::Both,
        }
    }
}

/// Source pixel index for every destination pixel of a lossless geometric
/// transform; returns the new dimensions alongside.
fn index_map(w: usize, h: usize, f: impl Fn(usize, usize) -> (usize, usize), out: (usize, usize)) -> Vec<usize> {
    let (ow, oh) = out;
    let mut idx = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let (sx, sy) = f(x, y);
            debug_assert!(sx < w && sy < h);
            idx.push(sy * w + sx);
        }
    }
    idx
}

fn flip_map(w: usize, h: usize, mode: FlipMode) -> Vec<usize> {
    index_map(
        w,
        h,
        |x, y| match mode {
            FlipMode::Horizontal => (w - 1 - x, y),
            FlipMode::Vertical => (x, h - 1 - y),
            FlipMode::Both => (w - 1 - x, h - 1 - y),
        },
        (w, h),
    )
}

/// Counter-clockwise rotation by `k` quarter turns.
fn rot90_map(w: usize, h: usize, k: usize) -> ((usize, usize), Vec<usize>) {
    match k % 4 {
        0 => ((w, h), (0..w * h).collect()),
        1 => ((h, w), index_map(w, h, |x, y| (w - 1 - y, x), (h, w))),
        2 => ((w, h), index_map(w, h, |x, y| (w - 1 - x, h - 1 - y), (w, h))),
        _ => ((h, w), index_map(w, h, |x, y| (y, h - 1 - x), (h, w))),
    }
}

fn gather_image(img: &RgbImage, dims: (usize, usize), idx: &[usize]) -> RgbImage {
    let src = img.data();
    let data = idx
        .iter()
        .flat_map(|&i| [src[i * 3], src[i * 3 + 1], src[i * 3 + 2]])
        .collect();
    RgbImage::from_clamped(dims.0, dims.1, data)
}

fn gather_mask(mask: &BinaryMask, dims: (usize, usize), idx: &[usize]) -> BinaryMask {
    let bits = idx.iter().map(|&i| mask.bits()[i]).collect();
    BinaryMask::new(dims.0, dims.1, bits).expect("index map covers output")
}

pub fn flip(img: &RgbImage, mode: FlipMode) -> RgbImage {
    gather_image(img, img.dims(), &flip_map(img.width(), img.height(), mode))
}

pub fn flip_mask(mask: &BinaryMask, mode: FlipMode) -> BinaryMask {
    gather_mask(mask, mask.dims(), &flip_map(mask.width(), mask.height(), mode))
}

pub fn rot90(img: &RgbImage, k: usize) -> RgbImage {
    let (dims, idx) = rot90_map(img.width(), img.height(), k);
    gather_image(img, dims, &idx)
}

pub fn rot90_mask(mask: &BinaryMask, k: usize) -> BinaryMask {
    let (dims, idx) = rot90_map(mask.width(), mask.height(), k);
    gather_mask(mask, dims, &idx)
}

/// Rotation (degrees), translation (fraction of width / height) and
/// horizontal shear (degrees) about the image centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineParams {
    pub rotation_deg: f64,
    pub translate: (f64, f64),
    pub shear_deg: f64,
}

impl AffineParams {
    /// Maps a destination coordinate to its source coordinate.
    fn inverse(&self, w: usize, h: usize) -> impl Fn(f64, f64) -> (f64, f64) {
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        let (tx, ty) = (self.translate.0 * w as f64, self.translate.1 * h as f64);
        let th = self.rotation_deg.to_radians();
        let sh = self.shear_deg.to_radians().tan();
        // Forward linear part A = R * S with S = [[1, sh], [0, 1]].
        let (c, s) = (th.cos(), th.sin());
        let a = [[c, c * sh - s], [s, s * sh + c]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
        move |x, y| {
            let dx = x - cx - tx;
            let dy = y - cy - ty;
            (inv[0][0] * dx + inv[0][1] * dy + cx, inv[1][0] * dx + inv[1][1] * dy + cy)
        }
    }
}

/// Bilinear affine warp; pixels mapped from outside the source are black.
pub fn affine(img: &RgbImage, p: &AffineParams) -> RgbImage {
    let (w, h) = img.dims();
    let inv = p.inverse(w, h);
    let src = img.data();
    let mut out = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = inv(x as f64 + 0.5, y as f64 + 0.5);
            let (fx, fy) = (sx - 0.5, sy - 0.5);
            let (x0, y0) = (fx.floor(), fy.floor());
            let (ax, ay) = (fx - x0, fy - y0);
            let o = (y * w + x) * 3;
            for (dy, wy) in [(0.0, 1.0 - ay), (1.0, ay)] {
                for (dx, wx) in [(0.0, 1.0 - ax), (1.0, ax)] {
                    let (px, py) = (x0 + dx, y0 + dy);
                    if px < 0.0 || py < 0.0 || px >= w as f64 || py >= h as f64 {
                        continue;
                    }
                    let i = (py as usize * w + px as usize) * 3;
                    let wt = wx * wy;
                    for c in 0..3 {
                        out[o + c] += wt * src[i + c];
                    }
                }
            }
        }
    }
    RgbImage::from_clamped(w, h, out)
}

pub fn affine_mask(mask: &BinaryMask, p: &AffineParams) -> BinaryMask {
    let (w, h) = mask.dims();
    let inv = p.inverse(w, h);
    BinaryMask::from_fn(w, h, |x, y| {
        let (sx, sy) = inv(x as f64 + 0.5, y as f64 + 0.5);
        if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
            return false;
        }
        mask.get(sx as usize, sy as usize)
    })
}

// ---------------------------------------------------------------------------
// Convolution helpers
// ---------------------------------------------------------------------------

fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Reflect-101 border (`dcb|abcd|cba`), as used by OpenCV filters.
fn reflect_idx(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

fn separable(img: &RgbImage, kernel: &[f64]) -> RgbImage {
    let (w, h) = img.dims();
    let r = (kernel.len() / 2) as isize;
    let src = img.data();
    let mut tmp = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, kv) in kernel.iter().enumerate() {
                let sx = reflect_idx(x as isize + k as isize - r, w);
                let i = (y * w + sx) * 3;
                for c in 0..3 {
                    acc[c] += kv * src[i + c];
                }
            }
            tmp[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }
    let mut out = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (k, kv) in kernel.iter().enumerate() {
                let sy = reflect_idx(y as isize + k as isize - r, h);
                let i = (sy * w + x) * 3;
                for c in 0..3 {
                    acc[c] += kv * tmp[i + c];
                }
            }
            out[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }
    RgbImage::from_clamped(w, h, out)
}

fn conv3x3(img: &RgbImage, k: &[[f64; 3]; 3]) -> RgbImage {
    let (w, h) = img.dims();
    let src = img.data();
    let mut out = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for (ky, row) in k.iter().enumerate() {
                let sy = reflect_idx(y as isize + ky as isize - 1, h);
                for (kx, kv) in row.iter().enumerate() {
                    let sx = reflect_idx(x as isize + kx as isize - 1, w);
                    let i = (sy * w + sx) * 3;
                    for c in 0..3 {
                        acc[c] += kv * src[i + c];
                    }
                }
            }
            out[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }
    RgbImage::from_clamped(w, h, out)
}

fn blend(a: &RgbImage, b: &RgbImage, weight_b: f64) -> RgbImage {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (1.0 - weight_b) * x + weight_b * y)
        .collect();
    RgbImage::from_clamped(a.width(), a.height(), data)
}

// ---------------------------------------------------------------------------
// Blur family
// ---------------------------------------------------------------------------

pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Gaussian blur with standard deviation `sigma` (pixels).
pub fn gaussian_blur(img: &RgbImage, sigma: f64) -> RgbImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    separable(img, &gaussian_kernel(sigma, radius))
}

/// Gaussian blur with an odd kernel size; sigma follows OpenCV's rule
/// `0.3 * ((k - 1) / 2 - 1) + 0.8`.
pub fn gaussian_blur_ksize(img: &RgbImage, ksize: usize) -> RgbImage {
    let k = ksize.max(1) | 1;
    if k == 1 {
        return img.clone();
    }
    let sigma = 0.3 * ((k as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    separable(img, &gaussian_kernel(sigma, k / 2))
}

/// Averages along a line segment of `length` pixels at `angle_deg`.
pub fn motion_blur(img: &RgbImage, length: usize, angle_deg: f64) -> RgbImage {
    if length <= 1 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let (c, s) = (angle_deg.to_radians().cos(), angle_deg.to_radians().sin());
    let half = (length as f64 - 1.0) / 2.0;
    let mut offsets: Vec<(isize, isize)> = (0..length)
        .map(|i| {
            let t = i as f64 - half;
            ((t * c).round() as isize, (t * s).round() as isize)
        })
        .collect();
    offsets.sort_unstable();
    offsets.dedup();
    let n = offsets.len() as f64;
    let src = img.data();
    let mut out = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for &(dx, dy) in &offsets {
                let i = (clamp_idx(y as isize + dy, h) * w + clamp_idx(x as isize + dx, w)) * 3;
                for c in 0..3 {
                    acc[c] += src[i + c];
                }
            }
            let o = (y * w + x) * 3;
            for c in 0..3 {
                out[o + c] = acc[c] / n;
            }
        }
    }
    RgbImage::from_clamped(w, h, out)
}

/// Uniform disk kernel of the given radius, computed with per-row prefix sums.
pub fn disk_blur(img: &RgbImage, radius: f64) -> RgbImage {
    let r = radius.floor() as isize;
    if r < 1 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let src = img.data();
    // Half-widths of the disk per row offset.
    let spans: Vec<(isize, isize)> = (-r..=r)
        .map(|dy| {
            let hw = ((radius * radius - (dy * dy) as f64).max(0.0)).sqrt().floor() as isize;
            (dy, hw)
        })
        .collect();
    let area: f64 = spans.iter().map(|(_, hw)| (2 * hw + 1) as f64).sum();

    // Row prefix sums over a clamp-extended row: index j covers x = j - r.
    let ext = w + 2 * r as usize;
    let mut prefix = vec![0.0; h * (ext + 1) * 3];
    for y in 0..h {
        let base = y * (ext + 1) * 3;
        for j in 0..ext {
            let sx = clamp_idx(j as isize - r, w);
            for c in 0..3 {
                prefix[base + (j + 1) * 3 + c] = prefix[base + j * 3 + c] + src[(y * w + sx) * 3 + c];
            }
        }
    }
    let mut out = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for &(dy, hw) in &spans {
                let sy = clamp_idx(y as isize + dy, h);
                let base = sy * (ext + 1) * 3;
                let lo = (x as isize - hw + r) as usize;
                let hi = (x as isize + hw + r + 1) as usize;
                for c in 0..3 {
                    acc[c] += prefix[base + hi * 3 + c] - prefix[base + lo * 3 + c];
                }
            }
            let o = (y * w + x) * 3;
            for c in 0..3 {
                out[o + c] = acc[c] / area;
            }
        }
    }
    RgbImage::from_clamped(w, h, out)
}

/// Per-channel median over a `ksize` x `ksize` window (odd sizes; 1 is identity).
pub fn median_blur(img: &RgbImage, ksize: usize) -> RgbImage {
    let k = ksize.max(1) | 1;
    if k == 1 {
        return img.clone();
    }
    let (w, h) = img.dims();
    let r = (k / 2) as isize;
    let src = img.data();
    let mut out = vec![0.0; w * h * 3];
    let mut window = Vec::with_capacity(k * k);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                window.clear();
                for dy in -r..=r {
                    let sy = reflect_idx(y as isize + dy, h);
                    for dx in -r..=r {
                        let sx = reflect_idx(x as isize + dx, w);
                        window.push(src[(sy * w + sx) * 3 + c]);
                    }
                }
                let mid = window.len() / 2;
                let (_, m, _) = window.select_nth_unstable_by(mid, f64::total_cmp);
                out[(y * w + x) * 3 + c] = *m;
            }
        }
    }
    RgbImage::from_clamped(w, h, out)
}

/// Mean of `steps` radial rescales with factors evenly spaced in `[1, max_factor]`.
pub fn zoom_blur(img: &RgbImage, max_factor: f64, steps: usize) -> RgbImage {
    let (w, h) = img.dims();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let src = img.data();
    let steps = steps.max(1);
    let factors: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                max_factor
            } else {
                1.0 + (max_factor - 1.0) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let mut out = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for z in &factors {
                let sx = cx + (x as f64 + 0.5 - cx) / z - 0.5;
                let sy = cy + (y as f64 + 0.5 - cy) / z - 0.5;
                let px = bilinear_clamped(src, w, h, sx, sy);
                for c in 0..3 {
                    acc[c] += px[c];
                }
            }
            let o = (y * w + x) * 3;
            for c in 0..3 {
                out[o + c] = acc[c] / steps as f64;
            }
        }
    }
    RgbImage::from_clamped(w, h, out)
}

fn bilinear_clamped(src: &[f64], w: usize, h: usize, x: f64, y: f64) -> [f64; 3] {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (ax, ay) = (x - x0 as f64, y - y0 as f64);
    let mut out = [0.0; 3];
    for c in 0..3 {
        let p = |xx: usize, yy: usize| src[(yy * w + xx) * 3 + c];
        out[c] = (1.0 - ay) * ((1.0 - ax) * p(x0, y0) + ax * p(x1, y0)) + ay * ((1.0 - ax) * p(x0, y1) + ax * p(x1, y1));
    }
    out
}

// ---------------------------------------------------------------------------
// Sharpness
// ---------------------------------------------------------------------------

/// Blend with a smoothed copy: `factor * img + (1 - factor) * smooth`; factor
/// above 1 sharpens. Border pixels keep their original value.
pub fn adjust_sharpness(img: &RgbImage, factor: f64) -> RgbImage {
    const K: [[f64; 3]; 3] = [
        [1.0 / 13.0, 1.0 / 13.0, 1.0 / 13.0],
        [1.0 / 13.0, 5.0 / 13.0, 1.0 / 13.0],
        [1.0 / 13.0, 1.0 / 13.0, 1.0 / 13.0],
    ];
    let (w, h) = img.dims();
    let mut smooth = conv3x3(img, &K).into_data();
    let src = img.data();
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                let i = (y * w + x) * 3;
                smooth[i..i + 3].copy_from_slice(&src[i..i + 3]);
            }
        }
    }
    let smooth = RgbImage::from_clamped(w, h, smooth);
    blend(&smooth, img, factor)
}

/// Sharpen with kernel `(1 - visibility) * identity + visibility * E(lightness)`
/// where `E = [[-1,-1,-1],[-1,8+lightness,-1],[-1,-1,-1]]`.
pub fn sharpen(img: &RgbImage, visibility: f64, lightness: f64) -> RgbImage {
    let v = visibility;
    let k = [
        [-v, -v, -v],
        [-v, (1.0 - v) + v * (8.0 + lightness), -v],
        [-v, -v, -v],
    ];
    conv3x3(img, &k)
}

/// Blend toward a Gaussian-blurred copy with weight `visibility`.
pub fn soften(img: &RgbImage, visibility: f64, ksize: usize) -> RgbImage {
    blend(img, &gaussian_blur_ksize(img, ksize), visibility)
}

// ---------------------------------------------------------------------------
// Photometric
// ---------------------------------------------------------------------------

pub fn grayscale(img: &RgbImage) -> RgbImage {
    map_pixels(img, |p| {
        let l = luma(&p);
        [l, l, l]
    })
}

pub fn adjust_brightness(img: &RgbImage, factor: f64) -> RgbImage {
    map_pixels(img, |p| p.map(|v| v * factor))
}

/// Scales deviations from the image's mean gray level.
pub fn adjust_contrast(img: &RgbImage, factor: f64) -> RgbImage {
    let n = (img.width() * img.height()) as f64;
    let mean = img.data().chunks_exact(3).map(luma).sum::<f64>() / n;
    map_pixels(img, |p| p.map(|v| mean + factor * (v - mean)))
}

/// Scales each pixel's deviation from its own gray level.
pub fn adjust_saturation(img: &RgbImage, factor: f64) -> RgbImage {
    map_pixels(img, |p| {
        let l = luma(&p);
        p.map(|v| l + factor * (v - l))
    })
}

/// Rotates hue by `shift` turns (fraction of the colour circle).
pub fn adjust_hue(img: &RgbImage, shift: f64) -> RgbImage {
    if shift == 0.0 {
        return img.clone();
    }
    map_pixels(img, |p| {
        let (h, s, v) = rgb_to_hsv(p);
        hsv_to_rgb((h + shift).rem_euclid(1.0), s, v)
    })
}

fn rgb_to_hsv([r, g, b]: [f64; 3]) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / d).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / d + 2.0) / 6.0
    } else {
        ((r - g) / d + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    (h, s, max)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    if s == 0.0 {
        return [v, v, v];
    }
    let h6 = h * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match (i as i64).rem_euclid(6) {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Inverts every intensity at or above `threshold`.
pub fn solarize(img: &RgbImage, threshold: f64) -> RgbImage {
    map_pixels(img, |p| p.map(|v| if v >= threshold { 1.0 - v } else { v }))
}

/// Adds zero-mean Gaussian noise with the given variance.
pub fn gaussian_noise<R: Rng + ?Sized>(img: &RgbImage, variance: f64, rng: &mut R) -> RgbImage {
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite variance");
    let data = img.data().iter().map(|v| v + normal.sample(rng)).collect();
    RgbImage::from_clamped(img.width(), img.height(), data)
}
