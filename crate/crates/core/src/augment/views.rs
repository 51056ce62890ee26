//! Multi-crop views for self-supervised pretraining.

use serde::{Deserialize, Serialize};

use super::{AppliedTransform, Pipeline, PipelinePreset, ViewRole};
use crate::error::{Error, Result};
use crate::image::{normalize, NormalizationStats, NormalizedImage, RgbImage};

pub const GLOBAL_SIDE: usize = 256;
pub const LOCAL_SIDE: usize = 96;
pub const DEFAULT_N_LOCAL: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    Ndsa,
    Dsa,
}

impl Flavor {
    pub fn preset(self, role: ViewRole) -> PipelinePreset {
        match self {
            Flavor::Ndsa => PipelinePreset::PretrainNdsa(role),
            Flavor::Dsa => PipelinePreset::PretrainDsa(role),
        }
    }

    /// Statistics applied after augmentation.
    pub fn stats(self) -> NormalizationStats {
        match self {
            Flavor::Ndsa => NormalizationStats::IMAGENET,
            Flavor::Dsa => NormalizationStats::WLE,
        }
    }
}

/// Two global views and `n_local` local views of one image, before
/// normalization. `logs` holds the fired transforms of each view in the
/// order global1, global2, locals.
#[derive(Clone, Debug)]
pub struct ViewSet {
    pub global1: RgbImage,
    pub global2: RgbImage,
    pub locals: Vec<RgbImage>,
    pub stats: NormalizationStats,
    pub logs: Vec<Vec<AppliedTransform>>,
}

impl ViewSet {
    /// All views normalized with the flavor's statistics, globals first.
    pub fn normalized(&self) -> Vec<NormalizedImage> {
        [&self.global1, &self.global2]
            .into_iter()
            .chain(self.locals.iter())
            .map(|v| normalize(v, &self.stats))
            .collect()
    }
}

pub fn pretrain_views(image: &RgbImage, flavor: Flavor, n_local: usize, sample_id: &str, seed: u64) -> Result<ViewSet> {
    let (w, h) = image.dims();
    if w < LOCAL_SIDE || h < LOCAL_SIDE {
        return Err(Error::invalid(
            "pretrain views",
            format!("{sample_id}: image {w}x{h} is smaller than {LOCAL_SIDE}x{LOCAL_SIDE}"),
        ));
    }
    let view = |role: ViewRole, key: String| -> Result<(RgbImage, Vec<AppliedTransform>)> {
        let out = Pipeline::new(flavor.preset(role)).apply(image, None, &key, seed)?;
        Ok((out.image, out.log))
    };
    let (global1, log1) = view(ViewRole::Global1, format!("{sample_id}/global1"))?;
    let (global2, log2) = view(ViewRole::Global2, format!("{sample_id}/global2"))?;
    let mut locals = Vec::with_capacity(n_local);
    let mut logs = vec![log1, log2];
    for i in 0..n_local {
        let (img, log) = view(ViewRole::Local, format!("{sample_id}/local{i}"))?;
        locals.push(img);
        logs.push(log);
    }
    Ok(ViewSet { global1, global2, locals, stats: flavor.stats(), logs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(side: usize) -> RgbImage {
        let data = (0..side * side * 3).map(|i| ((i * 13) % 97) as f64 / 96.0).collect();
        RgbImage::new(side, side, data).unwrap()
    }

    #[test]
    fn view_counts_and_sizes() {
        let img = image(128);
        for flavor in [Flavor::Ndsa, Flavor::Dsa] {
            let v = pretrain_views(&img, flavor, 3, "a", 1).unwrap();
            assert_eq!(v.global1.dims(), (256, 256));
            assert_eq!(v.global2.dims(), (256, 256));
            assert_eq!(v.locals.len(), 3);
            assert!(v.locals.iter().all(|l| l.dims() == (96, 96)));
            assert_eq!(v.normalized().len(), 5);
        }
    }

    #[test]
    fn no_locals_keeps_globals() {
        let img = image(100);
        let with = pretrain_views(&img, Flavor::Dsa, 2, "b", 7).unwrap();
        let without = pretrain_views(&img, Flavor::Dsa, 0, "b", 7).unwrap();
        assert!(without.locals.is_empty());
        assert_eq!(with.global1, without.global1);
        assert_eq!(with.global2, without.global2);
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(pretrain_views(&image(95), Flavor::Ndsa, 1, "c", 0).is_err());
    }

    #[test]
    fn flavor_statistics() {
        assert_eq!(Flavor::Ndsa.stats(), NormalizationStats::IMAGENET);
        assert_eq!(Flavor::Dsa.stats(), NormalizationStats::WLE);
    }
}
