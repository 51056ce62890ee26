//! Segmentation and classification losses with analytic gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consensus::{GtStrategy, TrainingTarget};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[CLAMP_EPS, 1 - CLAMP_EPS]` before logs.
pub const CLAMP_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub label_smoothing: f64,
    pub dice_smooth: f64,
    pub w_bce: f64,
    pub w_dice: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { label_smoothing: 0.01, dice_smooth: 1.0, w_bce: 1.0, w_dice: 1.0 }
    }
}

impl LossConfig {
    pub fn new(label_smoothing: f64, dice_smooth: f64, w_bce: f64, w_dice: f64) -> Result<Self> {
        let cfg = LossConfig { label_smoothing, dice_smooth, w_bce, w_dice };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.label_smoothing) {
            return Err(Error::invalid("loss config", format!("label smoothing {} outside [0, 0.5)", self.label_smoothing)));
        }
        if !(self.dice_smooth.is_finite() && self.dice_smooth > 0.0) {
            return Err(Error::invalid("loss config", format!("dice smoothing {} must be positive", self.dice_smooth)));
        }
        if !(self.w_bce >= 0.0 && self.w_dice >= 0.0) {
            return Err(Error::invalid("loss config", "loss weights must be non-negative"));
        }
        Ok(())
    }
}

/// A scalar loss and its gradient with respect to each prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub grad: Vec<f64>,
}

impl LossValue {
    fn zeros(n: usize) -> Self {
        LossValue { loss: 0.0, grad: vec![0.0; n] }
    }

    fn add_scaled(&mut self, other: &LossValue, w: f64) {
        self.loss += w * other.loss;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += w * o;
        }
    }
}

fn check_inputs(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: target.len() });
    }
    if pred.is_empty() {
        return Err(Error::invalid("loss", "empty input"));
    }
    if let Some(p) = pred.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid("loss", format!("prediction {p} outside [0,1]")));
    }
    if let Some(t) = target.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::invalid("loss", format!("target {t} outside [0,1]")));
    }
    Ok(())
}

/// Mean binary cross-entropy against targets smoothed as
/// `t' = t (1 - eps) + eps / 2`. Where the prediction is clamped the
/// gradient is zero.
pub fn bce_loss(pred: &[f64], target: &[f64], cfg: &LossConfig) -> Result<LossValue> {
    check_inputs(pred, target)?;
    let eps = cfg.label_smoothing;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let ts = t * (1.0 - eps) + eps / 2.0;
            let pc = p.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
            loss -= ts * pc.ln() + (1.0 - ts) * (1.0 - pc).ln();
            if pc != p {
                0.0
            } else {
                (-ts / pc + (1.0 - ts) / (1.0 - pc)) / n
            }
        })
        .collect();
    Ok(LossValue { loss: loss / n, grad })
}

/// Soft Dice loss `1 - (2 Σ p t + s) / (Σ p + Σ t + s)` against a binary target.
pub fn dice_loss(pred: &[f64], target: &[f64], cfg: &LossConfig) -> Result<LossValue> {
    check_inputs(pred, target)?;
    if let Some(t) = target.iter().find(|t| **t != 0.0 && **t != 1.0) {
        return Err(Error::invalid("dice loss", format!("target value {t} is not binary; use BCE for soft targets")));
    }
    let s = cfg.dice_smooth;
    let inter: f64 = pred.iter().zip(target).map(|(p, t)| p * t).sum();
    let u = pred.iter().sum::<f64>() + target.iter().sum::<f64>() + s;
    let num = 2.0 * inter + s;
    let grad = target.iter().map(|t| -(2.0 * t * u - num) / (u * u)).collect();
    Ok(LossValue { loss: 1.0 - num / u, grad })
}

/// Weighted BCE + Dice against one binary target.
pub fn composite_loss(pred: &[f64], target: &[f64], cfg: &LossConfig) -> Result<LossValue> {
    let mut out = LossValue::zeros(pred.len());
    out.add_scaled(&bce_loss(pred, target, cfg)?, cfg.w_bce);
    out.add_scaled(&dice_loss(pred, target, cfg)?, cfg.w_dice);
    Ok(out)
}

/// Segmentation loss under a ground-truth strategy.
///
/// Single-mask strategies take one binary target. `Multiple` takes the four
/// consensus masks and averages their composites. `Average` takes the soft
/// average mask and uses BCE only. `Random` takes either one already drawn
/// mask or all four, in which case one is drawn with `rng`.
pub fn composite_seg_loss<R: Rng + ?Sized>(
    pred: &[f64],
    targets: &[&[f64]],
    strategy: GtStrategy,
    cfg: &LossConfig,
    rng: &mut R,
) -> Result<LossValue> {
    cfg.validate()?;
    let arity_error = |expected: &str| {
        Error::invalid("segmentation loss", format!("{strategy} expects {expected}, got {} target(s)", targets.len()))
    };
    match strategy {
        GtStrategy::Multiple => {
            if targets.len() != 4 {
                return Err(arity_error("4 targets"));
            }
            let mut out = LossValue::zeros(pred.len());
            for t in targets {
                out.add_scaled(&composite_loss(pred, t, cfg)?, 0.25);
            }
            Ok(out)
        }
        GtStrategy::Average => match targets {
            [t] => bce_loss(pred, t, cfg),
            _ => Err(arity_error("1 target")),
        },
        GtStrategy::Random => match targets {
            [t] => composite_loss(pred, t, cfg),
            [_, _, _, _] => composite_loss(pred, targets[rng.random_range(0..4)], cfg),
            _ => Err(arity_error("1 or 4 targets")),
        },
        _ => match targets {
            [t] => composite_loss(pred, t, cfg),
            _ => Err(arity_error("1 target")),
        },
    }
}

/// Flattens a training target into per-pixel target vectors.
pub fn target_values(target: &TrainingTarget) -> Vec<Vec<f64>> {
    let binary = |m: &crate::image::BinaryMask| m.bits().iter().map(|b| f64::from(u8::from(*b))).collect();
    match target {
        TrainingTarget::Binary(m) => vec![binary(m)],
        TrainingTarget::Soft(m) => vec![m.values().to_vec()],
        TrainingTarget::Multiple(ms) => ms.iter().map(binary).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::{build_consensus, training_target, ExpertDelineation};
    use crate::image::BinaryMask;
    use crate::rng::StreamRng;
    use rand::SeedableRng;

    const H: f64 = 1e-5;

    fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let mut x = x.to_vec();
        (0..x.len())
            .map(|i| {
                let orig = x[i];
                x[i] = orig + H;
                let up = f(&x);
                x[i] = orig - H;
                let down = f(&x);
                x[i] = orig;
                (up - down) / (2.0 * H)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        diff / scale.max(1e-300)
    }

    fn random_case(rng: &mut StreamRng, n: usize) -> (Vec<f64>, Vec<f64>) {
        let pred = (0..n).map(|_| rng.random_range(0.02..0.98)).collect();
        let target = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
        (pred, target)
    }

    #[test]
    fn bce_at_one_half_is_ln2() {
        for eps in [0.0, 0.01, 0.2] {
            let cfg = LossConfig { label_smoothing: eps, ..LossConfig::default() };
            let v = bce_loss(&[0.5; 4], &[0.0, 1.0, 0.3, 1.0], &cfg).unwrap();
            assert!((v.loss - std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn bce_smoothed_value() {
        let v = bce_loss(&[0.9], &[1.0], &LossConfig::default()).unwrap();
        let expected = -(0.995 * 0.9f64.ln() + 0.005 * 0.1f64.ln());
        assert!((v.loss - expected).abs() < 1e-12);
        assert!((v.loss - 0.11635).abs() < 5e-5);
    }

    #[test]
    fn bce_exchange_symmetry() {
        let mut rng = StreamRng::seed_from_u64(1);
        let (p, t) = random_case(&mut rng, 30);
        let cfg = LossConfig::default();
        let a = bce_loss(&p, &t, &cfg).unwrap().loss;
        let p2: Vec<f64> = p.iter().map(|x| 1.0 - x).collect();
        let t2: Vec<f64> = t.iter().map(|x| 1.0 - x).collect();
        assert!((a - bce_loss(&p2, &t2, &cfg).unwrap().loss).abs() < 1e-12);
    }

    #[test]
    fn bce_clamp_zeroes_gradient() {
        let v = bce_loss(&[0.0, 1.0], &[1.0, 0.0], &LossConfig::default()).unwrap();
        assert!(v.loss.is_finite());
        assert_eq!(v.grad, vec![0.0, 0.0]);
    }

    #[test]
    fn dice_examples() {
        let cfg = LossConfig::default();
        let t: Vec<f64> = (0..100).map(|i| f64::from(u8::from(i < 50))).collect();
        assert_eq!(dice_loss(&t, &t, &cfg).unwrap().loss, 0.0);
        let inv: Vec<f64> = t.iter().map(|x| 1.0 - x).collect();
        let v = dice_loss(&inv, &t, &cfg).unwrap();
        assert!((v.loss - (1.0 - 1.0 / 101.0)).abs() < 1e-12);
        assert!(dice_loss(&[0.5], &[0.5], &cfg).is_err());
    }

    #[test]
    fn shape_and_config_errors() {
        let cfg = LossConfig::default();
        assert!(matches!(bce_loss(&[0.5, 0.5], &[1.0], &cfg), Err(Error::LengthMismatch { .. })));
        assert!(dice_loss(&[0.5], &[1.0, 0.0], &cfg).is_err());
        assert!(LossConfig::new(0.5, 1.0, 1.0, 1.0).is_err());
        assert!(LossConfig::new(0.01, 0.0, 1.0, 1.0).is_err());
        assert!(LossConfig::new(0.01, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let cfg = LossConfig::default();
        let mut rng = StreamRng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.random_range(2..40);
            let (p, t) = random_case(&mut rng, n);
            let b = bce_loss(&p, &t, &cfg).unwrap();
            let nb = numeric_grad(|x| bce_loss(x, &t, &cfg).unwrap().loss, &p);
            assert!(rel_err(&b.grad, &nb) < 1e-5);
            let d = dice_loss(&p, &t, &cfg).unwrap();
            let nd = numeric_grad(|x| dice_loss(x, &t, &cfg).unwrap().loss, &p);
            assert!(rel_err(&d.grad, &nd) < 1e-5);
        }
    }

    fn strip(pixels: &str) -> BinaryMask {
        BinaryMask::from_fn(6, 1, |x, _| pixels.contains((b'a' + x as u8) as char))
    }

    #[test]
    fn multiple_on_consensus_example_is_mean_of_composites() {
        let d1 = ExpertDelineation::new("1", strip("abcd"), strip("bc")).unwrap();
        let d2 = ExpertDelineation::new("2", strip("bcde"), strip("cd")).unwrap();
        let set = build_consensus(&d1, &d2).unwrap();
        let mut rng = StreamRng::seed_from_u64(3);
        let targets = target_values(&training_target(&set, GtStrategy::Multiple, &mut rng));
        let refs: Vec<&[f64]> = targets.iter().map(|t| t.as_slice()).collect();
        let pred = [0.1, 0.6, 0.9, 0.7, 0.3, 0.05];
        let cfg = LossConfig::default();
        let got = composite_seg_loss(&pred, &refs, GtStrategy::Multiple, &cfg, &mut rng).unwrap();

        // Oracle: each composite evaluated from scratch.
        let oracle = |t: &[f64]| {
            let eps = cfg.label_smoothing;
            let bce: f64 = pred
                .iter()
                .zip(t)
                .map(|(p, t)| {
                    let ts = t * (1.0 - eps) + eps / 2.0;
                    -(ts * p.ln() + (1.0 - ts) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / pred.len() as f64;
            let i: f64 = pred.iter().zip(t).map(|(p, t)| p * t).sum();
            let dice = 1.0 - (2.0 * i + 1.0) / (pred.iter().sum::<f64>() + t.iter().sum::<f64>() + 1.0);
            bce + dice
        };
        let expected = targets.iter().map(|t| oracle(t)).sum::<f64>() / 4.0;
        assert!((got.loss - expected).abs() < 1e-12);
    }

    #[test]
    fn multiple_with_identical_masks_equals_single() {
        let cfg = LossConfig::default();
        let mut rng = StreamRng::seed_from_u64(4);
        let (p, t) = random_case(&mut rng, 25);
        let single = composite_seg_loss(&p, &[&t], GtStrategy::PlausibleSpot, &cfg, &mut rng).unwrap();
        let multi = composite_seg_loss(&p, &[&t, &t, &t, &t], GtStrategy::Multiple, &cfg, &mut rng).unwrap();
        assert!((single.loss - multi.loss).abs() < 1e-12);
        for (a, b) in single.grad.iter().zip(&multi.grad) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn average_uses_bce_on_soft_targets() {
        let cfg = LossConfig::default();
        let mut rng = StreamRng::seed_from_u64(5);
        let pred = [0.2, 0.4, 0.6, 0.8, 0.5];
        let soft = [0.0, 0.25, 0.5, 0.75, 1.0];
        let v = composite_seg_loss(&pred, &[&soft], GtStrategy::Average, &cfg, &mut rng).unwrap();
        assert!(v.loss.is_finite());
        assert_eq!(v, bce_loss(&pred, &soft, &cfg).unwrap());
    }

    #[test]
    fn arity_is_checked() {
        let cfg = LossConfig::default();
        let mut rng = StreamRng::seed_from_u64(6);
        let t = [1.0, 0.0];
        let p = [0.5, 0.5];
        assert!(composite_seg_loss(&p, &[&t], GtStrategy::Multiple, &cfg, &mut rng).is_err());
        assert!(composite_seg_loss(&p, &[&t, &t], GtStrategy::Average, &cfg, &mut rng).is_err());
        assert!(composite_seg_loss(&p, &[&t, &t], GtStrategy::HardSpot, &cfg, &mut rng).is_err());
        assert!(composite_seg_loss(&p, &[&t, &t], GtStrategy::Random, &cfg, &mut rng).is_err());
        assert!(composite_seg_loss(&p, &[&t, &t, &t, &t], GtStrategy::Random, &cfg, &mut rng).is_ok());
    }
}
