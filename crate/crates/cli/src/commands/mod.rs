//! One module per subcommand.

pub mod augment;
pub mod compare;
pub mod consensus;
pub mod corrupt;
pub mod evaluate;
pub mod plan;
pub mod report;

use std::path::{Path, PathBuf};

use cade_core::image::{crop, resample_nearest, Region};
use cade_core::manifest::{load_manifest, resolve_path};
use cade_core::{BinaryMask, DatasetManifest, RgbImage, SampleRecord};

use crate::{CliResult, Context};

pub(crate) fn manifest_arg(ctx: &Context, path: &Path) -> CliResult<(DatasetManifest, PathBuf)> {
    let path = ctx.path(path);
    Ok((load_manifest(&path)?, path))
}

/// A record's image, cut to its active region when one is given.
pub(crate) fn record_image(record: &SampleRecord, manifest_path: &Path) -> CliResult<RgbImage> {
    let img = RgbImage::load_png(&resolve_path(manifest_path, &record.image_path))?;
    Ok(match record.crop {
        Some([x, y, w, h]) => crop(&img, x as usize, y as usize, w as usize, h as usize)?,
        None => img,
    })
}

/// Applies a record's active-region crop to a mask in raw-frame coordinates.
pub(crate) fn crop_mask(record: &SampleRecord, mask: BinaryMask) -> BinaryMask {
    match record.crop {
        Some([x, y, w, h]) => {
            let region = Region { x: f64::from(x), y: f64::from(y), width: f64::from(w), height: f64::from(h) };
            resample_nearest(&mask, region, w as usize, h as usize)
        }
        None => mask,
    }
}

/// A stored path made absolute, so derived manifests written elsewhere keep
/// pointing at the same file.
pub(crate) fn absolute(manifest_path: &Path, stored: &str) -> String {
    let p = resolve_path(manifest_path, stored);
    std::path::absolute(&p).unwrap_or(p).display().to_string()
}
