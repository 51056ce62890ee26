//! Data-pipeline and evaluation tooling for endoscopic computer-aided
//! detection: augmentation and corruption engines, consensus ground truth,
//! loss kernels and training control, metric evaluation with output fusion,
//! and paired model comparison.
//!
//! Trained models are external; their outputs enter as prediction files.

pub mod augment;
pub mod consensus;
pub mod corrupt;
pub mod error;
pub mod eval;
pub mod filters;
pub mod image;
pub mod manifest;
pub mod rng;
pub mod stats;
pub mod training;
pub mod wavelet;

pub use error::{Error, Result};
pub use image::{BinaryMask, NormalizationStats, RgbImage, SoftMask};
pub use manifest::{DatasetManifest, Label, SampleRecord, Split, Tier};
