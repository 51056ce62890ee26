//! Seeded augmentation pipelines with exclusion groups and paired
//! image/mask geometry.
//!
//! Applying a pipeline happens in two steps. [`Pipeline::plan`] draws every
//! random decision for one sample (which transforms fire, their parameters,
//! crop placement) from the sample's own stream; [`Pipeline::execute`] then
//! runs the plan on pixels. The plan does not depend on image size, so the
//! same plan can be audited without touching an image.

mod presets;
mod views;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{self, AffineParams, FlipMode};
use crate::image::{check_dims, resample_bicubic, resample_nearest, BinaryMask, Region, RgbImage};
use crate::rng::stream;

pub use presets::preset_specs;
pub(crate) use presets::{
    defocus_buckets, motion_buckets, range_buckets, sharpen_buckets, soften_buckets, BRIGHTNESS_DOWN,
    BRIGHTNESS_UP, CONTRAST_DOWN, CONTRAST_UP, HUE_GREEN, HUE_RED, SATURATION_DOWN, SATURATION_UP,
};
pub use views::{pretrain_views, Flavor, ViewSet, DEFAULT_N_LOCAL, GLOBAL_SIDE, LOCAL_SIDE};

/// Number of rescales averaged by zoom blur.
pub const ZOOM_STEPS: usize = 10;
pub const SOLARIZE_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeBucket {
    pub lo: f64,
    pub hi: f64,
}

impl RangeBucket {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("range bucket", format!("[{lo}, {hi}] is not an ordered finite range")));
        }
        Ok(RangeBucket { lo, hi })
    }

    pub fn point(v: f64) -> Self {
        RangeBucket { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        let u: f64 = rng.random();
        (self.lo + (self.hi - self.lo) * u).min(self.hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformKind {
    Flip,
    Rotate90,
    Affine,
    Sharpness,
    SharpnessIncrease,
    SharpnessDecrease,
    Grayscale,
    GaussianBlur,
    ColorJitter,
    RandomCrop,
    GaussianNoise,
    MotionBlur,
    ZoomBlur,
    LensBlur,
    MedianBlur,
    DefocusBlur,
    ContrastIncrease,
    ContrastDecrease,
    BrightnessIncrease,
    BrightnessDecrease,
    SaturationIncrease,
    SaturationDecrease,
    HueRed,
    HueGreen,
    Solarize,
}

impl TransformKind {
    /// Transforms that move pixels and therefore also move the mask.
    pub fn is_geometric(self) -> bool {
        matches!(self, TransformKind::Flip | TransformKind::Rotate90 | TransformKind::Affine | TransformKind::RandomCrop)
    }

    pub fn is_parametric(self) -> bool {
        !matches!(self, TransformKind::Grayscale | TransformKind::Solarize)
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Identifier of a mutual-exclusion group within one preset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Group(pub u8);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub probability: f64,
    /// Outer list: options; inner list: one range per parameter.
    pub buckets: Vec<Vec<RangeBucket>>,
    pub exclusion_group: Option<Group>,
}

impl TransformSpec {
    pub fn new(
        kind: TransformKind,
        probability: f64,
        buckets: Vec<Vec<RangeBucket>>,
        exclusion_group: Option<Group>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::invalid("transform spec", format!("{kind}: probability {probability} outside [0,1]")));
        }
        if kind.is_parametric() && buckets.is_empty() {
            return Err(Error::invalid("transform spec", format!("{kind} needs at least one bucket")));
        }
        if !kind.is_parametric() && !buckets.is_empty() {
            return Err(Error::invalid("transform spec", format!("{kind} takes no parameters")));
        }
        if let Some(first) = buckets.first() {
            if first.is_empty() || buckets.iter().any(|b| b.len() != first.len()) {
                return Err(Error::invalid("transform spec", format!("{kind}: options differ in parameter count")));
            }
        }
        Ok(TransformSpec { kind, probability, buckets, exclusion_group })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledParams {
    /// Zero-based index of the chosen option.
    pub option: usize,
    pub values: Vec<f64>,
}

/// Picks one option uniformly among the first `max_option` (all when
/// `None`), then draws each parameter uniformly inside it.
pub fn sample_bucket<R: Rng + ?Sized>(
    spec: &TransformSpec,
    rng: &mut R,
    max_option: Option<usize>,
) -> Result<SampledParams> {
    if spec.buckets.is_empty() {
        return Err(Error::invalid("sample_bucket", format!("{} is not parametric", spec.kind)));
    }
    let n = match max_option {
        None => spec.buckets.len(),
        Some(m) if m >= 1 && m <= spec.buckets.len() => m,
        Some(m) => {
            return Err(Error::invalid(
                "sample_bucket",
                format!("max_option {m} outside 1..={} for {}", spec.buckets.len(), spec.kind),
            ))
        }
    };
    let option = if n == 1 { 0 } else { rng.random_range(0..n) };
    let values = spec.buckets[option].iter().map(|b| b.draw(rng)).collect();
    Ok(SampledParams { option, values })
}

/// Decides which specs fire. Ungrouped specs fire independently with their
/// probability. Within a group at most one member fires: a single uniform
/// draw selects member `i` with probability `p_i` (rescaled when the group's
/// probabilities sum above one) and nothing otherwise. Returns indices in
/// list order.
pub fn resolve_exclusions<R: Rng + ?Sized>(specs: &[TransformSpec], rng: &mut R) -> Vec<usize> {
    let mut group_choice: Vec<(Group, Option<usize>)> = Vec::new();
    let mut active = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        match spec.exclusion_group {
            None => {
                if fires(spec.probability, rng) {
                    active.push(i);
                }
            }
            Some(g) => {
                let chosen = match group_choice.iter().find(|(gg, _)| *gg == g) {
                    Some((_, c)) => *c,
                    None => {
                        let c = choose_member(specs, g, rng);
                        group_choice.push((g, c));
                        c
                    }
                };
                if chosen == Some(i) {
                    active.push(i);
                }
            }
        }
    }
    active
}

fn fires<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u < p
}

fn choose_member<R: Rng + ?Sized>(specs: &[TransformSpec], g: Group, rng: &mut R) -> Option<usize> {
    let members: Vec<usize> = (0..specs.len()).filter(|i| specs[*i].exclusion_group == Some(g)).collect();
    let total: f64 = members.iter().map(|i| specs[*i].probability).sum();
    let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for i in members {
        acc += specs[i].probability * scale;
        if u < acc {
            return Some(i);
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ViewRole {
    Global1,
    Global2,
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PipelinePreset {
    DownstreamTrainNdsa,
    DownstreamValNdsa,
    DownstreamTrainDsa,
    DownstreamValDsa,
    PretrainNdsa(ViewRole),
    PretrainDsa(ViewRole),
}

impl PipelinePreset {
    pub fn name(self) -> String {
        let role = |r: ViewRole| match r {
            ViewRole::Global1 => "global1",
            ViewRole::Global2 => "global2",
            ViewRole::Local => "local",
        };
        match self {
            PipelinePreset::DownstreamTrainNdsa => "train-ndsa".into(),
            PipelinePreset::DownstreamValNdsa => "val-ndsa".into(),
            PipelinePreset::DownstreamTrainDsa => "train-dsa".into(),
            PipelinePreset::DownstreamValDsa => "val-dsa".into(),
            PipelinePreset::PretrainNdsa(r) => format!("pretrain-ndsa:{}", role(r)),
            PipelinePreset::PretrainDsa(r) => format!("pretrain-dsa:{}", role(r)),
        }
    }

    pub fn view_role(self) -> Option<ViewRole> {
        match self {
            PipelinePreset::PretrainNdsa(r) | PipelinePreset::PretrainDsa(r) => Some(r),
            _ => None,
        }
    }

    /// Output side of the crop for pretraining views.
    fn crop_side(self) -> Option<usize> {
        self.view_role().map(|r| match r {
            ViewRole::Local => LOCAL_SIDE,
            _ => GLOBAL_SIDE,
        })
    }
}

impl fmt::Display for PipelinePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for PipelinePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let role = |r: &str| match r {
            "global1" => Some(ViewRole::Global1),
            "global2" => Some(ViewRole::Global2),
            "local" => Some(ViewRole::Local),
            _ => None,
        };
        let preset = match lower.as_str() {
            "train-ndsa" => Some(PipelinePreset::DownstreamTrainNdsa),
            "val-ndsa" => Some(PipelinePreset::DownstreamValNdsa),
            "train-dsa" => Some(PipelinePreset::DownstreamTrainDsa),
            "val-dsa" => Some(PipelinePreset::DownstreamValDsa),
            other => match other.split_once(':') {
                Some(("pretrain-ndsa", r)) => role(r).map(PipelinePreset::PretrainNdsa),
                Some(("pretrain-dsa", r)) => role(r).map(PipelinePreset::PretrainDsa),
                _ => None,
            },
        };
        preset.ok_or_else(|| {
            Error::invalid(
                "preset",
                format!(
                    "unknown preset {s:?}; expected train-ndsa, val-ndsa, train-dsa, val-dsa, \
                     pretrain-ndsa:<role> or pretrain-dsa:<role> with role global1|global2|local"
                ),
            )
        })
    }
}

/// One fired transform with every random quantity it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppliedTransform {
    pub kind: TransformKind,
    /// Chosen option, for parametric transforms.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub option: Option<usize>,
    pub params: Vec<f64>,
    /// Auxiliary draws: crop `[aspect_ratio, u_x, u_y]`, motion angle.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub extra: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AugmentOutput {
    pub image: RgbImage,
    pub mask: Option<BinaryMask>,
    pub log: Vec<AppliedTransform>,
}

#[derive(Clone, Debug)]
pub struct Pipeline {
    preset: PipelinePreset,
    specs: Vec<TransformSpec>,
    max_option: Option<usize>,
}

impl Pipeline {
    pub fn new(preset: PipelinePreset) -> Self {
        Pipeline { preset, specs: preset_specs(preset), max_option: None }
    }

    /// Restricts every parameter draw to the first `cap` options.
    pub fn with_option_cap(mut self, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::invalid("option cap", "must be at least 1"));
        }
        self.max_option = Some(cap);
        Ok(self)
    }

    pub fn preset(&self) -> PipelinePreset {
        self.preset
    }

    pub fn specs(&self) -> &[TransformSpec] {
        &self.specs
    }

    /// Draws the fired transforms and their parameters for one sample.
    pub fn plan(&self, sample_id: &str, seed: u64) -> Vec<AppliedTransform> {
        let mut rng = stream(seed, sample_id);
        let active = resolve_exclusions(&self.specs, &mut rng);
        active
            .into_iter()
            .map(|i| {
                let spec = &self.specs[i];
                let (option, params) = if spec.kind.is_parametric() {
                    let cap = self.max_option.map(|c| c.min(spec.buckets.len()));
                    let s = sample_bucket(spec, &mut rng, cap).expect("preset specs are parametric with buckets");
                    (Some(s.option), s.values)
                } else {
                    (None, Vec::new())
                };
                let extra = match spec.kind {
                    TransformKind::RandomCrop => {
                        let (lo, hi) = ((3.0f64 / 4.0).ln(), (4.0f64 / 3.0).ln());
                        let ratio = (lo + (hi - lo) * rng.random::<f64>()).exp();
                        vec![ratio, rng.random(), rng.random()]
                    }
                    TransformKind::MotionBlur => vec![rng.random_range(0.0..180.0)],
                    _ => Vec::new(),
                };
                AppliedTransform { kind: spec.kind, option, params, extra }
            })
            .collect()
    }

    /// Runs a plan. Noise draws come from a separate per-sample stream.
    pub fn execute(
        &self,
        plan: &[AppliedTransform],
        image: &RgbImage,
        mask: Option<&BinaryMask>,
        sample_id: &str,
        seed: u64,
    ) -> Result<(RgbImage, Option<BinaryMask>)> {
        if let Some(m) = mask {
            check_dims(image.dims(), m.dims())?;
        }
        let mut noise_rng = stream(seed, &format!("{sample_id}#noise"));
        let mut img = image.clone();
        let mut msk = mask.cloned();
        for t in plan {
            if t.kind.is_geometric() {
                let (i, m) = apply_geometric(t, &img, msk.as_ref(), self.preset.crop_side());
                img = i;
                msk = m;
            } else {
                img = apply_photometric(t, &img, &mut noise_rng);
            }
        }
        Ok((img, msk))
    }

    pub fn apply(&self, image: &RgbImage, mask: Option<&BinaryMask>, sample_id: &str, seed: u64) -> Result<AugmentOutput> {
        let log = self.plan(sample_id, seed);
        let (image, mask) = self.execute(&log, image, mask, sample_id, seed)?;
        Ok(AugmentOutput { image, mask, log })
    }
}

/// Runs `preset` on one sample with the stream derived from `(seed, sample_id)`.
pub fn apply(
    preset: PipelinePreset,
    image: &RgbImage,
    mask: Option<&BinaryMask>,
    sample_id: &str,
    seed: u64,
) -> Result<AugmentOutput> {
    Pipeline::new(preset).apply(image, mask, sample_id, seed)
}

/// Crop rectangle from an area fraction, aspect ratio and two uniform
/// placement draws, clamped to the image.
fn crop_rect(w: usize, h: usize, scale: f64, ratio: f64, ux: f64, uy: f64) -> (usize, usize, usize, usize) {
    let area = scale * (w * h) as f64;
    let cw = ((area * ratio).sqrt().round() as usize).clamp(1, w);
    let ch = ((area / ratio).sqrt().round() as usize).clamp(1, h);
    let x = ((ux * (w - cw + 1) as f64) as usize).min(w - cw);
    let y = ((uy * (h - ch + 1) as f64) as usize).min(h - ch);
    (x, y, cw, ch)
}

fn apply_geometric(
    t: &AppliedTransform,
    img: &RgbImage,
    mask: Option<&BinaryMask>,
    crop_side: Option<usize>,
) -> (RgbImage, Option<BinaryMask>) {
    match t.kind {
        TransformKind::Flip => {
            let mode = FlipMode::from_index(t.params[0] as usize);
            (filters::flip(img, mode), mask.map(|m| filters::flip_mask(m, mode)))
        }
        TransformKind::Rotate90 => {
            let k = t.params[0] as usize;
            (filters::rot90(img, k), mask.map(|m| filters::rot90_mask(m, k)))
        }
        TransformKind::Affine => {
            let p = AffineParams {
                rotation_deg: t.params[0],
                translate: (t.params[1], t.params[2]),
                shear_deg: t.params[3],
            };
            (filters::affine(img, &p), mask.map(|m| filters::affine_mask(m, &p)))
        }
        TransformKind::RandomCrop => {
            let (w, h) = img.dims();
            let (x, y, cw, ch) = crop_rect(w, h, t.params[0], t.extra[0], t.extra[1], t.extra[2]);
            let (ow, oh) = crop_side.map_or((w, h), |s| (s, s));
            let region = Region { x: x as f64, y: y as f64, width: cw as f64, height: ch as f64 };
            (resample_bicubic(img, region, ow, oh), mask.map(|m| resample_nearest(m, region, ow, oh)))
        }
        _ => unreachable!("not a geometric transform"),
    }
}

fn odd(v: f64) -> usize {
    (v.round().max(1.0) as usize) | 1
}

fn apply_photometric<R: Rng + ?Sized>(t: &AppliedTransform, img: &RgbImage, noise_rng: &mut R) -> RgbImage {
    let p = &t.params;
    match t.kind {
        TransformKind::Sharpness => filters::adjust_sharpness(img, p[0]),
        TransformKind::SharpnessIncrease => filters::sharpen(img, p[0], p[1]),
        TransformKind::SharpnessDecrease => filters::soften(img, p[0], odd(p[1])),
        TransformKind::Grayscale => filters::grayscale(img),
        TransformKind::GaussianBlur => filters::gaussian_blur(img, p[0]),
        TransformKind::ColorJitter => {
            let mut out = filters::adjust_brightness(img, p[0]);
            out = filters::adjust_contrast(&out, p[1]);
            out = filters::adjust_saturation(&out, p[2]);
            if let Some(h) = p.get(3) {
                out = filters::adjust_hue(&out, *h);
            }
            out
        }
        TransformKind::GaussianNoise => filters::gaussian_noise(img, p[0], noise_rng),
        TransformKind::MotionBlur => filters::motion_blur(img, odd(p[0]), t.extra[0]),
        TransformKind::ZoomBlur => filters::zoom_blur(img, p[0], ZOOM_STEPS),
        TransformKind::LensBlur | TransformKind::DefocusBlur => filters::disk_blur(img, p[0]),
        TransformKind::MedianBlur => filters::median_blur(img, odd(p[0])),
        TransformKind::ContrastIncrease | TransformKind::ContrastDecrease => filters::adjust_contrast(img, p[0]),
        TransformKind::BrightnessIncrease | TransformKind::BrightnessDecrease => filters::adjust_brightness(img, p[0]),
        TransformKind::SaturationIncrease | TransformKind::SaturationDecrease => filters::adjust_saturation(img, p[0]),
        TransformKind::HueRed | TransformKind::HueGreen => filters::adjust_hue(img, p[0]),
        TransformKind::Solarize => filters::solarize(img, SOLARIZE_THRESHOLD),
        TransformKind::Flip | TransformKind::Rotate90 | TransformKind::Affine | TransformKind::RandomCrop => {
            unreachable!("geometric transform")
        }
    }
}
