//! Learning-rate plateau reduction and early stopping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub factor: f64,
    /// Non-improving epochs before the learning rate drops.
    pub plateau: usize,
    pub max_reductions: usize,
    /// Non-improving epochs before training stops.
    pub patience: usize,
    /// Absolute margin an epoch must beat the best value by.
    pub min_delta: f64,
    pub mode: Mode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig { factor: 10.0, plateau: 10, max_reductions: 3, patience: 25, min_delta: 5e-4, mode: Mode::Minimize }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerState {
    pub best_metric: Option<f64>,
    /// Consecutive non-improving epochs; drives early stopping.
    pub epochs_since_improvement: usize,
    /// Non-improving epochs since the last improvement or reduction.
    pub plateau_counter: usize,
    pub lr0: f64,
    pub lr: f64,
    pub reductions_used: usize,
    pub stopped: bool,
    pub epoch: usize,
}

/// What happened during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub improved: bool,
    pub reduced: bool,
    pub stopped: bool,
}

impl ControllerState {
    /// `baseline` is the metric before the first epoch; without one, the
    /// first step sets the best value.
    pub fn new(lr0: f64, baseline: Option<f64>) -> Result<Self> {
        if !(lr0 > 0.0 && lr0.is_finite()) {
            return Err(Error::invalid("controller", format!("initial learning rate {lr0} must be positive")));
        }
        Ok(ControllerState {
            best_metric: baseline,
            epochs_since_improvement: 0,
            plateau_counter: 0,
            lr0,
            lr: lr0,
            reductions_used: 0,
            stopped: false,
            epoch: 0,
        })
    }

    pub fn step(&mut self, metric: f64, cfg: &ControllerConfig) -> Result<StepEvents> {
        if self.stopped {
            return Err(Error::ControllerStopped);
        }
        if !metric.is_finite() {
            return Err(Error::invalid("controller", format!("metric {metric} is not finite")));
        }
        self.epoch += 1;
        let mut ev = StepEvents::default();
        let improved = match self.best_metric {
            None => true,
            Some(best) => {
                let gain = match cfg.mode {
                    Mode::Minimize => best - metric,
                    Mode::Maximize => metric - best,
                };
                // Margins within rounding of min_delta count as equal to it.
                gain > cfg.min_delta + 1e-12
            }
        };
        if improved {
            self.best_metric = Some(metric);
            self.epochs_since_improvement = 0;
            self.plateau_counter = 0;
            ev.improved = true;
            return Ok(ev);
        }
        self.epochs_since_improvement += 1;
        self.plateau_counter += 1;
        if self.plateau_counter >= cfg.plateau && self.reductions_used < cfg.max_reductions {
            self.reductions_used += 1;
            self.lr = self.lr0 / cfg.factor.powi(self.reductions_used as i32);
            self.plateau_counter = 0;
            ev.reduced = true;
        }
        if self.epochs_since_improvement >= cfg.patience {
            self.stopped = true;
            ev.stopped = true;
        }
        Ok(ev)
    }
}

/// Functional form of [`ControllerState::step`].
pub fn controller_step(state: &ControllerState, metric: f64, cfg: &ControllerConfig) -> Result<ControllerState> {
    let mut next = state.clone();
    next.step(metric, cfg)?;
    Ok(next)
}
