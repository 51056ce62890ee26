//! The published augmentation tables.

use super::{Group, PipelinePreset, RangeBucket, TransformKind as K, TransformSpec, ViewRole};

fn deg(v: f64) -> RangeBucket {
    RangeBucket::point(v)
}

fn r(lo: f64, hi: f64) -> RangeBucket {
    RangeBucket::new(lo, hi).expect("table ranges are ordered")
}

/// One option per point value, single parameter.
fn points(values: &[f64]) -> Vec<Vec<RangeBucket>> {
    values.iter().map(|v| vec![deg(*v)]).collect()
}

/// One option per range, single parameter.
fn ranges(values: &[(f64, f64)]) -> Vec<Vec<RangeBucket>> {
    values.iter().map(|(lo, hi)| vec![r(*lo, *hi)]).collect()
}

/// Each option's range shared by `n` parameters.
fn shared(values: &[(f64, f64)], n: usize) -> Vec<Vec<RangeBucket>> {
    values.iter().map(|(lo, hi)| vec![r(*lo, *hi); n]).collect()
}

fn spec(kind: K, p: f64, buckets: Vec<Vec<RangeBucket>>, group: Option<Group>) -> TransformSpec {
    TransformSpec::new(kind, p, buckets, group).expect("table specs are valid")
}

const MOTION: [f64; 5] = [9.0, 11.0, 17.0, 21.0, 25.0];
const ZOOM: [(f64, f64); 5] = [(1.01, 1.02), (1.03, 1.04), (1.05, 1.06), (1.07, 1.08), (1.09, 1.1)];
const LENS: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 9.0];
const MEDIAN: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 9.0];
const DEFOCUS: [f64; 5] = [9.0, 11.0, 17.0, 21.0, 25.0];
const SHARP_VIS: [(f64, f64); 5] = [(0.1, 0.2), (0.2, 0.3), (0.3, 0.4), (0.4, 0.5), (0.5, 0.6)];
const SOFTEN_KSIZE: [f64; 5] = [3.0, 5.0, 7.0, 9.0, 11.0];
pub(crate) const CONTRAST_UP: [(f64, f64); 5] = [(1.01, 1.1), (1.11, 1.2), (1.21, 1.25), (1.26, 1.3), (1.31, 1.4)];
pub(crate) const CONTRAST_DOWN: [(f64, f64); 5] = [(0.95, 0.99), (0.9, 0.94), (0.85, 0.89), (0.75, 0.84), (0.65, 0.74)];
pub(crate) const BRIGHTNESS_UP: [(f64, f64); 5] = [(1.01, 1.2), (1.21, 1.4), (1.41, 1.6), (1.61, 1.8), (1.81, 2.0)];
pub(crate) const BRIGHTNESS_DOWN: [(f64, f64); 5] = [(0.9, 0.99), (0.85, 0.89), (0.8, 0.84), (0.75, 0.79), (0.7, 0.74)];
pub(crate) const SATURATION_UP: [(f64, f64); 5] = [(1.01, 1.05), (1.06, 1.1), (1.11, 1.15), (1.16, 1.2), (1.21, 1.25)];
pub(crate) const SATURATION_DOWN: [(f64, f64); 5] = [(0.9, 0.99), (0.8, 0.89), (0.7, 0.79), (0.6, 0.69), (0.5, 0.59)];
pub(crate) const HUE_RED: [(f64, f64); 5] = [(0.0, 0.01), (0.011, 0.013), (0.014, 0.016), (0.017, 0.018), (0.019, 0.02)];
pub(crate) const HUE_GREEN: [(f64, f64); 5] =
    [(-0.01, 0.0), (-0.013, -0.011), (-0.016, -0.014), (-0.02, -0.017), (-0.025, -0.021)];
const NOISE_VAR: [f64; 4] = [0.01, 0.02, 0.03, 0.05];

pub(crate) fn motion_buckets() -> Vec<Vec<RangeBucket>> {
    points(&MOTION)
}

pub(crate) fn defocus_buckets() -> Vec<Vec<RangeBucket>> {
    points(&DEFOCUS)
}

pub(crate) fn sharpen_buckets() -> Vec<Vec<RangeBucket>> {
    shared(&SHARP_VIS, 2)
}

pub(crate) fn soften_buckets() -> Vec<Vec<RangeBucket>> {
    SHARP_VIS
        .iter()
        .zip(SOFTEN_KSIZE)
        .map(|((lo, hi), k)| vec![r(*lo, *hi), deg(k)])
        .collect()
}

pub(crate) fn range_buckets(table: &[(f64, f64)]) -> Vec<Vec<RangeBucket>> {
    ranges(table)
}

fn flip_both() -> Vec<Vec<RangeBucket>> {
    // Horizontal, vertical, or both.
    points(&[0.0, 1.0, 2.0])
}

fn rotate90() -> Vec<Vec<RangeBucket>> {
    points(&[1.0, 2.0, 3.0])
}

fn ndsa_color_jitter(options: &[(f64, f64)]) -> Vec<Vec<RangeBucket>> {
    shared(options, 3)
}

/// Downstream training set, non-domain-specific.
fn downstream_train_ndsa() -> Vec<TransformSpec> {
    let geo_blur = Some(Group(0));
    let color = Some(Group(1));
    vec![
        spec(K::Flip, 0.5, flip_both(), None),
        spec(K::Rotate90, 0.6, rotate90(), None),
        spec(
            K::Affine,
            0.2,
            vec![vec![r(-25.0, 25.0), r(-0.05, 0.05), r(-0.05, 0.05), r(-15.0, 15.0)]],
            geo_blur,
        ),
        spec(K::Sharpness, 0.2, points(&[2.0]), geo_blur),
        spec(K::Grayscale, 0.2, vec![], color),
        spec(K::GaussianBlur, 0.2, ranges(&[(0.1, 2.0)]), geo_blur),
        spec(K::ColorJitter, 0.6, ndsa_color_jitter(&[(0.5, 1.5), (0.7, 1.3), (0.9, 1.1)]), color),
        spec(K::RandomCrop, 0.33, ranges(&[(0.7, 1.1)]), None),
        spec(K::GaussianNoise, 0.5, points(&NOISE_VAR), None),
    ]
}

fn downstream_val_ndsa() -> Vec<TransformSpec> {
    vec![
        spec(K::Flip, 0.5, flip_both(), None),
        spec(K::Rotate90, 0.6, rotate90(), None),
        spec(K::ColorJitter, 0.6, ndsa_color_jitter(&[(0.7, 1.3), (0.9, 1.1)]), None),
    ]
}

/// Downstream training set, domain-specific.
fn downstream_train_dsa() -> Vec<TransformSpec> {
    let blur = Some(Group(0));
    let sharp = Some(Group(1));
    let contrast = Some(Group(2));
    let bright = Some(Group(3));
    let sat = Some(Group(4));
    let hue = Some(Group(5));
    vec![
        spec(K::Flip, 0.5, flip_both(), None),
        spec(K::Rotate90, 0.6, rotate90(), None),
        spec(K::RandomCrop, 0.33, ranges(&[(0.7, 1.1)]), None),
        spec(K::MotionBlur, 0.1, points(&MOTION), blur),
        spec(K::ZoomBlur, 0.1, ranges(&ZOOM), blur),
        spec(K::LensBlur, 0.1, points(&LENS), blur),
        spec(K::MedianBlur, 0.1, points(&MEDIAN), blur),
        spec(K::DefocusBlur, 0.1, points(&DEFOCUS), blur),
        spec(K::SharpnessIncrease, 0.25, sharpen_buckets(), sharp),
        spec(K::SharpnessDecrease, 0.25, soften_buckets(), sharp),
        spec(K::ContrastIncrease, 0.25, ranges(&CONTRAST_UP), contrast),
        spec(K::ContrastDecrease, 0.25, ranges(&CONTRAST_DOWN), contrast),
        spec(K::BrightnessIncrease, 0.25, ranges(&BRIGHTNESS_UP), bright),
        spec(K::BrightnessDecrease, 0.25, ranges(&BRIGHTNESS_DOWN), bright),
        spec(K::SaturationIncrease, 0.25, ranges(&SATURATION_UP), sat),
        spec(K::SaturationDecrease, 0.25, ranges(&SATURATION_DOWN), sat),
        spec(K::HueRed, 0.25, ranges(&HUE_RED), hue),
        spec(K::HueGreen, 0.25, ranges(&HUE_GREEN), hue),
        spec(K::GaussianNoise, 0.5, points(&NOISE_VAR), None),
    ]
}

/// The DSA training table with every transform limited to its first three options.
fn downstream_val_dsa() -> Vec<TransformSpec> {
    downstream_train_dsa()
        .into_iter()
        .map(|mut s| {
            s.buckets.truncate(3);
            s
        })
        .collect()
}

fn pretrain_ndsa(role: ViewRole) -> Vec<TransformSpec> {
    let color = Some(Group(0));
    let crop_scale = match role {
        ViewRole::Local => (0.05, 0.4),
        _ => (0.4, 1.0),
    };
    let mut specs = vec![
        spec(K::RandomCrop, 1.0, ranges(&[crop_scale]), None),
        spec(K::Flip, 0.5, points(&[0.0]), None),
        spec(
            K::ColorJitter,
            0.4,
            vec![vec![r(0.6, 1.4), r(0.6, 1.4), r(0.8, 1.2), r(-0.1, 0.1)]],
            color,
        ),
        spec(K::Grayscale, 0.1, vec![], color),
    ];
    let blur_p = match role {
        ViewRole::Global1 => 1.0,
        ViewRole::Global2 => 0.1,
        ViewRole::Local => 0.5,
    };
    specs.push(spec(K::GaussianBlur, blur_p, ranges(&[(0.1, 2.0)]), None));
    if role == ViewRole::Global2 {
        specs.push(spec(K::Solarize, 0.2, vec![], None));
    }
    specs
}

fn pretrain_dsa(role: ViewRole) -> Vec<TransformSpec> {
    let blur = Some(Group(0));
    let sharp = Some(Group(1));
    let contrast = Some(Group(2));
    let bright = Some(Group(3));
    let sat = Some(Group(4));
    let hue = Some(Group(5));
    // Probability of the blur family as a whole, split evenly over its members.
    let family_p = match role {
        ViewRole::Global1 => 0.25,
        ViewRole::Global2 => 0.025,
        ViewRole::Local => 0.125,
    };
    let member_p = family_p / 4.0;
    let mut specs = match role {
        ViewRole::Local => vec![spec(K::RandomCrop, 1.0, ranges(&[(0.05, 0.4)]), None)],
        _ => vec![
            spec(K::RandomCrop, 1.0, ranges(&[(0.4, 1.0)]), None),
            spec(K::Flip, 0.5, flip_both(), None),
        ],
    };
    specs.extend([
        spec(K::MotionBlur, member_p, points(&MOTION), blur),
        spec(K::ZoomBlur, member_p, ranges(&ZOOM), blur),
        spec(K::LensBlur, member_p, points(&LENS), blur),
        spec(K::MedianBlur, member_p, points(&MEDIAN), blur),
    ]);
    if role == ViewRole::Global2 {
        specs.push(spec(K::SharpnessIncrease, 0.1, sharpen_buckets(), sharp));
        specs.push(spec(K::SharpnessDecrease, 0.1, soften_buckets(), sharp));
    }
    specs.extend([
        spec(K::ContrastIncrease, 0.4, ranges(&CONTRAST_UP), contrast),
        spec(K::ContrastDecrease, 0.4, ranges(&CONTRAST_DOWN), contrast),
        spec(K::BrightnessIncrease, 0.4, ranges(&BRIGHTNESS_UP), bright),
        spec(K::BrightnessDecrease, 0.4, ranges(&BRIGHTNESS_DOWN), bright),
        spec(K::SaturationIncrease, 0.4, ranges(&SATURATION_UP), sat),
        spec(K::SaturationDecrease, 0.4, ranges(&SATURATION_DOWN), sat),
        spec(K::HueRed, 0.4, ranges(&HUE_RED), hue),
        spec(K::HueGreen, 0.4, ranges(&HUE_GREEN), hue),
    ]);
    specs
}

pub fn preset_specs(preset: PipelinePreset) -> Vec<TransformSpec> {
    match preset {
        PipelinePreset::DownstreamTrainNdsa => downstream_train_ndsa(),
        PipelinePreset::DownstreamValNdsa => downstream_val_ndsa(),
        PipelinePreset::DownstreamTrainDsa => downstream_train_dsa(),
        PipelinePreset::DownstreamValDsa => downstream_val_dsa(),
        PipelinePreset::PretrainNdsa(role) => pretrain_ndsa(role),
        PipelinePreset::PretrainDsa(role) => pretrain_dsa(role),
    }
}
