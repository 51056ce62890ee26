//! Classification, classification-by-segmentation and localization metrics,
//! output fusion, and multi-run reports.

mod ground_truth;
mod metrics;
mod predictions;
mod report;

pub use ground_truth::{consensus_from_delineations, ground_truth_mask, load_delineations, load_ground_truth};
pub use metrics::{auprc, auroc, fuse, midranks, FusionStrategy};
pub use predictions::{PredictionRecord, PredictionSet, SEG_MAX_TOLERANCE};
pub use report::{
    augmented_validation, evaluate, file_sha256, mean_dice, run_metrics, AugmentedValidation, EvalConfig, EvalReport,
    FileHash, MetricSummary, Provenance, ValidationSample, AUGMENTED_DRAWS, DEFAULT_THRESHOLD,
};
