//! Scaffolding around an external trainer: losses, sampling, frame addition,
//! learning-rate control and the exported optimizer constants.

mod controller;
mod losses;
mod sampling;

use serde::{Deserialize, Serialize};

pub use controller::{controller_step, ControllerConfig, ControllerState, Mode, StepEvents};
pub use losses::{
    bce_loss, composite_loss, composite_seg_loss, dice_loss, target_values, LossConfig, LossValue, CLAMP_EPS,
};
pub use sampling::{
    balanced_batch, parse_frame_tier, plan_frame_addition, FrameAdditionPlan, Fraction, TierSelection,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerPreset {
    pub name: String,
    pub amsgrad: bool,
    pub weight_decay: f64,
    pub betas: [f64; 2],
    /// Learning rates explored, `[min, max]`.
    pub lr_range: [f64; 2],
}

/// Everything an external trainer needs to reproduce the training setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingPreset {
    pub optimizer: OptimizerPreset,
    pub loss: LossConfig,
    pub clamp_eps: f64,
    /// Quantity driving learning-rate reductions.
    pub scheduler_monitor: String,
    /// Quantity driving early stopping.
    pub early_stopping_monitor: String,
    pub controller: ControllerConfig,
    pub balanced_sampling: bool,
    pub seeds: usize,
}

impl Default for TrainingPreset {
    fn default() -> Self {
        TrainingPreset {
            optimizer: OptimizerPreset {
                name: "adam".into(),
                amsgrad: true,
                weight_decay: 1e-4,
                betas: [0.9, 0.999],
                lr_range: [1e-6, 1e-4],
            },
            loss: LossConfig::default(),
            clamp_eps: CLAMP_EPS,
            scheduler_monitor: "val_loss".into(),
            early_stopping_monitor: "val_loss".into(),
            controller: ControllerConfig::default(),
            balanced_sampling: true,
            seeds: 5,
        }
    }
}
