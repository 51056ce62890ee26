//! CDF 9/7 lifting wavelet and coefficient truncation, used as a stand-in
//! for JPEG 2000 style compression artefacts.

use crate::image::RgbImage;

const ALPHA: f64 = -1.586_134_342_059_924;
const BETA: f64 = -0.052_980_118_572_961;
const GAMMA: f64 = 0.882_911_075_530_934;
const DELTA: f64 = 0.443_506_852_043_971;
const ZETA: f64 = 1.149_604_398_860_241;

/// One lifting step over the odd (`parity = 1`) or even samples of `x`,
/// with whole-sample symmetric extension at both ends.
fn lift(x: &mut [f64], parity: usize, coeff: f64) {
    let n = x.len();
    let at = |x: &[f64], i: isize| -> f64 {
        let j = if i < 0 {
            -i
        } else if i >= n as isize {
            2 * (n as isize - 1) - i
        } else {
            i
        };
        x[j as usize]
    };
    let mut i = parity;
    while i < n {
        let v = coeff * (at(x, i as isize - 1) + at(x, i as isize + 1));
        x[i] += v;
        i += 2;
    }
}

/// Forward transform of an even-length signal; output holds the
/// approximation in the first half and detail in the second.
fn forward_1d(x: &mut [f64], scratch: &mut Vec<f64>) {
    let n = x.len();
    lift(x, 1, ALPHA);
    lift(x, 0, BETA);
    lift(x, 1, GAMMA);
    lift(x, 0, DELTA);
    scratch.clear();
    scratch.extend(x.iter().step_by(2).map(|v| v * ZETA));
    scratch.extend(x.iter().skip(1).step_by(2).map(|v| v / ZETA));
    x.copy_from_slice(&scratch[..n]);
}

fn inverse_1d(x: &mut [f64], scratch: &mut Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    scratch.clear();
    scratch.resize(n, 0.0);
    for i in 0..half {
        scratch[2 * i] = x[i] / ZETA;
        scratch[2 * i + 1] = x[half + i] * ZETA;
    }
    x.copy_from_slice(scratch);
    lift(x, 0, -DELTA);
    lift(x, 1, -GAMMA);
    lift(x, 0, -BETA);
    lift(x, 1, -ALPHA);
}

/// Multi-level 2-D transform of a `w` x `h` plane in place. Both sides must
/// be divisible by `2^levels`.
pub fn forward_2d(plane: &mut [f64], w: usize, h: usize, levels: usize) {
    let mut scratch = Vec::new();
    let mut line = Vec::new();
    let (mut cw, mut ch) = (w, h);
    for _ in 0..levels {
        for y in 0..ch {
            forward_1d(&mut plane[y * w..y * w + cw], &mut scratch);
        }
        for x in 0..cw {
            line.clear();
            line.extend((0..ch).map(|y| plane[y * w + x]));
            forward_1d(&mut line, &mut scratch);
            for (y, v) in line.iter().enumerate() {
                plane[y * w + x] = *v;
            }
        }
        cw /= 2;
        ch /= 2;
    }
}

pub fn inverse_2d(plane: &mut [f64], w: usize, h: usize, levels: usize) {
    let mut scratch = Vec::new();
    let mut line = Vec::new();
    for level in (0..levels).rev() {
        let (cw, ch) = (w >> level, h >> level);
        for x in 0..cw {
            line.clear();
            line.extend((0..ch).map(|y| plane[y * w + x]));
            inverse_1d(&mut line, &mut scratch);
            for (y, v) in line.iter().enumerate() {
                plane[y * w + x] = *v;
            }
        }
        for y in 0..ch {
            inverse_1d(&mut plane[y * w..y * w + cw], &mut scratch);
        }
    }
}

fn mirror(i: usize, n: usize) -> usize {
    if i < n {
        i
    } else {
        (2 * (n - 1)).saturating_sub(i).min(n - 1)
    }
}

/// Keeps the largest `1 / ratio` of wavelet coefficients (by magnitude,
/// pooled over the three channels) and reconstructs.
pub fn truncate_coefficients(img: &RgbImage, ratio: f64) -> RgbImage {
    let (w, h) = img.dims();
    let mut levels = 0;
    while levels < 4 && (w.min(h) >> (levels + 1)) >= 4 {
        levels += 1;
    }
    if levels == 0 || ratio <= 1.0 {
        return img.clone();
    }
    let block = 1usize << levels;
    let pw = w.div_ceil(block) * block;
    let ph = h.div_ceil(block) * block;
    let src = img.data();
    let mut planes: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let mut p = vec![0.0; pw * ph];
            for y in 0..ph {
                let sy = mirror(y, h);
                for x in 0..pw {
                    p[y * pw + x] = src[(sy * w + mirror(x, w)) * 3 + c];
                }
            }
            forward_2d(&mut p, pw, ph, levels);
            p
        })
        .collect();

    let total = 3 * pw * ph;
    let keep = ((total as f64 / ratio).round() as usize).clamp(1, total);
    let mut mags: Vec<f64> = planes.iter().flatten().map(|v| v.abs()).collect();
    let (_, thr, _) = mags.select_nth_unstable_by(total - keep, f64::total_cmp);
    let thr = *thr;
    for p in &mut planes {
        for v in p.iter_mut() {
            if v.abs() < thr {
                *v = 0.0;
            }
        }
        inverse_2d(p, pw, ph, levels);
    }
    let mut out = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out[(y * w + x) * 3 + c] = planes[c][y * pw + x];
            }
        }
    }
    RgbImage::from_clamped(w, h, out)
}
