//! Corrupted robustness test sets: random compositions of an eleven-kind
//! corruption taxonomy at five severity levels, with every source image
//! replicated several times.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{
    defocus_buckets, motion_buckets, range_buckets, sharpen_buckets, soften_buckets, RangeBucket, BRIGHTNESS_DOWN,
    BRIGHTNESS_UP, CONTRAST_DOWN, CONTRAST_UP, HUE_GREEN, HUE_RED, SATURATION_DOWN, SATURATION_UP,
};
use crate::error::{Error, Result};
use crate::filters;
use crate::image::{resize, RgbImage};
use crate::manifest::{DatasetManifest, SampleRecord};
use crate::rng::stream;
use crate::wavelet;

pub const SEVERITY_LEVELS: u8 = 5;
pub const DEFAULT_REPLICATES: usize = 5;
pub const DEFAULT_MAX_K: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CorruptionKind {
    MotionBlur,
    LocalFocusBlur,
    Overexposure,
    Contrast,
    Saturation,
    Hue,
    Brightness,
    Sharpness,
    Jpeg,
    Jpeg2000,
    ResolutionReduction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    UserDependent,
    Acquisition,
    Compression,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 11] = [
        CorruptionKind::MotionBlur,
        CorruptionKind::LocalFocusBlur,
        CorruptionKind::Overexposure,
        CorruptionKind::Contrast,
        CorruptionKind::Saturation,
        CorruptionKind::Hue,
        CorruptionKind::Brightness,
        CorruptionKind::Sharpness,
        CorruptionKind::Jpeg,
        CorruptionKind::Jpeg2000,
        CorruptionKind::ResolutionReduction,
    ];

    pub fn category(self) -> Category {
        use CorruptionKind::*;
        match self {
            MotionBlur | LocalFocusBlur | Overexposure => Category::UserDependent,
            Contrast | Saturation | Hue | Brightness | Sharpness => Category::Acquisition,
            Jpeg | Jpeg2000 | ResolutionReduction => Category::Compression,
        }
    }

    /// Directions a kind can take; empty for kinds without one.
    pub fn variants(self) -> &'static [Variant] {
        use CorruptionKind::*;
        match self {
            Contrast | Saturation | Brightness | Sharpness => &[Variant::Increase, Variant::Decrease],
            Hue => &[Variant::Red, Variant::Green],
            _ => &[],
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Increase,
    Decrease,
    Red,
    Green,
}

/// A kind, its direction where it has one, and a severity in `1..=5`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub variant: Option<Variant>,
    pub severity: u8,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, variant: Option<Variant>, severity: u8) -> Result<Self> {
        if !(1..=SEVERITY_LEVELS).contains(&severity) {
            return Err(Error::invalid("corruption", format!("severity {severity} outside 1..=5")));
        }
        let allowed = kind.variants();
        let ok = match variant {
            None => allowed.is_empty(),
            Some(v) => allowed.contains(&v),
        };
        if !ok {
            return Err(Error::invalid("corruption", format!("{kind} does not take variant {variant:?}")));
        }
        Ok(CorruptionSpec { kind, variant, severity })
    }
}

/// A spec with its drawn parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedCorruption {
    #[serde(flatten)]
    pub spec: CorruptionSpec,
    pub params: Vec<f64>,
    /// Motion blur: `[angle_deg]`. Local focus blur: `[u_x, u_y, axis_ratio, angle_deg]`.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub extra: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionPlan {
    pub source_id: String,
    pub output_id: String,
    /// 1-based replicate index.
    pub replicate: usize,
    pub seed: u64,
    pub corruptions: Vec<PlannedCorruption>,
}

const OVEREXPOSURE_GAIN: [(f64, f64); 5] = [(1.05, 1.1), (1.15, 1.2), (1.25, 1.3), (1.35, 1.4), (1.45, 1.5)];
const LOCAL_FOCUS_COVERAGE: [f64; 5] = [0.2, 0.3, 0.4, 0.5, 0.6];
const JPEG_QUALITY: [f64; 5] = [60.0, 45.0, 30.0, 20.0, 10.0];
const JPEG2000_RATIO: [f64; 5] = [10.0, 20.0, 40.0, 80.0, 160.0];
const RESOLUTION_SCALE: [f64; 5] = [0.9, 0.75, 0.6, 0.45, 0.3];

fn points(values: &[f64]) -> Vec<Vec<RangeBucket>> {
    values.iter().map(|v| vec![RangeBucket::point(*v)]).collect()
}

/// The five parameter options of a kind, least severe first. Each option
/// holds one range per parameter.
pub fn severity_table(kind: CorruptionKind, variant: Option<Variant>) -> Result<Vec<Vec<RangeBucket>>> {
    use CorruptionKind::*;
    use Variant::*;
    let table = match (kind, variant) {
        (MotionBlur, None) => motion_buckets(),
        (LocalFocusBlur, None) => defocus_buckets()
            .into_iter()
            .zip(LOCAL_FOCUS_COVERAGE)
            .map(|(mut radius, cov)| {
                radius.push(RangeBucket::point(cov));
                radius
            })
            .collect(),
        (Overexposure, None) => range_buckets(&OVEREXPOSURE_GAIN),
        (Contrast, Some(Increase)) => range_buckets(&CONTRAST_UP),
        (Contrast, Some(Decrease)) => range_buckets(&CONTRAST_DOWN),
        (Saturation, Some(Increase)) => range_buckets(&SATURATION_UP),
        (Saturation, Some(Decrease)) => range_buckets(&SATURATION_DOWN),
        (Brightness, Some(Increase)) => range_buckets(&BRIGHTNESS_UP),
        (Brightness, Some(Decrease)) => range_buckets(&BRIGHTNESS_DOWN),
        (Hue, Some(Red)) => range_buckets(&HUE_RED),
        (Hue, Some(Green)) => range_buckets(&HUE_GREEN),
        (Sharpness, Some(Increase)) => sharpen_buckets(),
        (Sharpness, Some(Decrease)) => soften_buckets(),
        (Jpeg, None) => points(&JPEG_QUALITY),
        (Jpeg2000, None) => points(&JPEG2000_RATIO),
        (ResolutionReduction, None) => points(&RESOLUTION_SCALE),
        _ => return Err(Error::invalid("corruption", format!("{kind} does not take variant {variant:?}"))),
    };
    Ok(table)
}

fn draw_uniform<R: Rng + ?Sized>(b: &RangeBucket, rng: &mut R) -> f64 {
    if b.lo == b.hi {
        b.lo
    } else {
        (b.lo + (b.hi - b.lo) * rng.random::<f64>()).min(b.hi)
    }
}

/// Draws parameters for `spec` from its severity option.
pub fn draw_parameters<R: Rng + ?Sized>(spec: CorruptionSpec, rng: &mut R) -> Result<PlannedCorruption> {
    let table = severity_table(spec.kind, spec.variant)?;
    let params = table[usize::from(spec.severity) - 1].iter().map(|b| draw_uniform(b, rng)).collect();
    let extra = match spec.kind {
        CorruptionKind::MotionBlur => vec![rng.random_range(0.0..180.0)],
        CorruptionKind::LocalFocusBlur => {
            vec![rng.random(), rng.random(), rng.random_range(0.6..=1.0), rng.random_range(0.0..180.0)]
        }
        _ => Vec::new(),
    };
    Ok(PlannedCorruption { spec, params, extra })
}

pub fn output_id(source_id: &str, replicate: usize) -> String {
    format!("{source_id}_c{replicate}")
}

/// Plans `replicates` corrupted copies of every record. Each copy draws
/// `k` uniformly in `1..=max_k`, then `k` distinct kinds in random order,
/// each with a uniform severity. Every copy uses its own stream keyed by
/// source id and replicate, so plans do not depend on manifest order.
pub fn plan_corruption(
    manifest: &DatasetManifest,
    seed: u64,
    replicates: usize,
    max_k: usize,
) -> Result<Vec<CorruptionPlan>> {
    if manifest.is_empty() {
        return Err(Error::invalid("corruption plan", "manifest has no records"));
    }
    if replicates < 1 {
        return Err(Error::invalid("corruption plan", "replicates must be at least 1"));
    }
    if !(1..=CorruptionKind::ALL.len()).contains(&max_k) {
        return Err(Error::invalid("corruption plan", format!("max_k {max_k} outside 1..=11")));
    }
    let mut plans = Vec::with_capacity(manifest.len() * replicates);
    for record in &manifest.records {
        for r in 1..=replicates {
            plans.push(plan_one(&record.id, r, seed, max_k)?);
        }
    }
    Ok(plans)
}

fn plan_one(source_id: &str, replicate: usize, seed: u64, max_k: usize) -> Result<CorruptionPlan> {
    let mut rng = stream(seed, &format!("{source_id}#{replicate}"));
    let k = rng.random_range(1..=max_k);
    let mut kinds = CorruptionKind::ALL;
    let (chosen, _) = kinds.partial_shuffle(&mut rng, k);
    let mut corruptions = Vec::with_capacity(k);
    for kind in chosen.iter().copied() {
        let variant = match kind.variants() {
            [] => None,
            vs => Some(vs[rng.random_range(0..vs.len())]),
        };
        let severity = rng.random_range(1..=SEVERITY_LEVELS);
        corruptions.push(draw_parameters(CorruptionSpec::new(kind, variant, severity)?, &mut rng)?);
    }
    Ok(CorruptionPlan {
        source_id: source_id.to_string(),
        output_id: output_id(source_id, replicate),
        replicate,
        seed,
        corruptions,
    })
}

/// Applies the planned corruptions in order.
pub fn execute(plan: &CorruptionPlan, image: &RgbImage) -> Result<RgbImage> {
    let mut img = image.clone();
    for c in &plan.corruptions {
        img = apply(c, &img)?;
    }
    Ok(img)
}

pub fn apply(c: &PlannedCorruption, img: &RgbImage) -> Result<RgbImage> {
    use CorruptionKind::*;
    let p = &c.params;
    let odd = |v: f64| (v.round().max(1.0) as usize) | 1;
    Ok(match c.spec.kind {
        MotionBlur => filters::motion_blur(img, odd(p[0]), c.extra[0]),
        LocalFocusBlur => local_focus_blur(img, p[0], p[1], &c.extra),
        Overexposure => overexpose(img, p[0]),
        Contrast => filters::adjust_contrast(img, p[0]),
        Saturation => filters::adjust_saturation(img, p[0]),
        Hue => filters::adjust_hue(img, p[0]),
        Brightness => filters::adjust_brightness(img, p[0]),
        Sharpness => match c.spec.variant {
            Some(Variant::Increase) => filters::sharpen(img, p[0], p[1]),
            _ => filters::soften(img, p[0], odd(p[1])),
        },
        Jpeg => jpeg_round_trip(img, p[0].round() as u8)?,
        Jpeg2000 => wavelet::truncate_coefficients(img, p[0]),
        ResolutionReduction => {
            let (w, h) = img.dims();
            let sw = ((w as f64 * p[0]).round() as usize).max(1);
            let sh = ((h as f64 * p[0]).round() as usize).max(1);
            resize(&resize(img, sw, sh), w, h)
        }
    })
}

/// Gain with a proportional lift, clipped at white.
fn overexpose(img: &RgbImage, gain: f64) -> RgbImage {
    let lift = (gain - 1.0) * 0.5;
    let data = img.data().iter().map(|v| gain * v + lift).collect();
    RgbImage::from_clamped(img.width(), img.height(), data)
}

/// Disk blur blended in through a soft-edged ellipse covering `coverage` of
/// the frame.
fn local_focus_blur(img: &RgbImage, radius: f64, coverage: f64, extra: &[f64]) -> RgbImage {
    let (w, h) = img.dims();
    let (wf, hf) = (w as f64, h as f64);
    let (ux, uy, ratio, angle) = (extra[0], extra[1], extra[2], extra[3]);
    // Centre in the middle half of the frame.
    let cx = wf * (0.25 + 0.5 * ux);
    let cy = hf * (0.25 + 0.5 * uy);
    let a = (coverage * wf * hf / (std::f64::consts::PI * ratio)).sqrt();
    let b = ratio * a;
    let (c, s) = (angle.to_radians().cos(), angle.to_radians().sin());
    let blurred = filters::disk_blur(img, radius);
    let (src, bl) = (img.data(), blurred.data());
    let mut out = vec![0.0; w * h * 3];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let (u, v) = ((c * dx + s * dy) / a, (-s * dx + c * dy) / b);
            let d = (u * u + v * v).sqrt();
            // Smoothstep falloff between 0.8 and 1.2 of the ellipse radius.
            let t = ((1.2 - d) / 0.4).clamp(0.0, 1.0);
            let wgt = t * t * (3.0 - 2.0 * t);
            let i = (y * w + x) * 3;
            for k in 0..3 {
                out[i + k] = wgt * bl[i + k] + (1.0 - wgt) * src[i + k];
            }
        }
    }
    RgbImage::from_clamped(w, h, out)
}

/// Baseline JPEG encode at `quality`, then decode.
pub fn jpeg_round_trip(img: &RgbImage, quality: u8) -> Result<RgbImage> {
    use image::codecs::jpeg::JpegEncoder;
    use image::ImageEncoder;
    let (w, h) = img.dims();
    let codec_err = |e: image::ImageError| Error::Codec { path: "<jpeg>".into(), message: e.to_string() };
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality)
        .write_image(&img.to_rgb8(), w as u32, h as u32, image::ExtendedColorType::Rgb8)
        .map_err(codec_err)?;
    let decoded = image::load_from_memory_with_format(&buf, image::ImageFormat::Jpeg)
        .map_err(codec_err)?
        .to_rgb8();
    let data = decoded.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect();
    RgbImage::new(w, h, data)
}

/// Mean structural similarity of the luma planes over 7x7 windows.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    crate::image::check_dims(a.dims(), b.dims())?;
    let (w, h) = a.dims();
    const WIN: usize = 7;
    if w < WIN || h < WIN {
        return Err(Error::invalid("ssim", format!("image {w}x{h} smaller than the 7x7 window")));
    }
    let luma = |img: &RgbImage| -> Vec<f64> {
        img.data().chunks_exact(3).map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect()
    };
    let (la, lb) = (luma(a), luma(b));
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let n = (WIN * WIN) as f64;
    let cov_norm = n / (n - 1.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - WIN {
        for x in 0..=w - WIN {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..WIN {
                for dx in 0..WIN {
                    let i = (y + dy) * w + x + dx;
                    let (u, v) = (la[i], lb[i]);
                    sa += u;
                    sb += v;
                    saa += u * u;
                    sbb += v * v;
                    sab += u * v;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = cov_norm * (saa / n - ma * ma);
            let vb = cov_norm * (sbb / n - mb * mb);
            let cab = cov_norm * (sab / n - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// The manifest record of a corrupted copy: the source's label, patient,
/// tier, crop and ground-truth references with a new id and image path.
pub fn derived_record(source: &SampleRecord, plan: &CorruptionPlan, image_path: String) -> SampleRecord {
    SampleRecord { id: plan.output_id.clone(), image_path, ..source.clone() }
}
