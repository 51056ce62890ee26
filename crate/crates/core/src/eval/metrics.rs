//! Ranking metrics and output fusion.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::invalid("score", format!("{s} is not a number")));
    }
    Ok(())
}

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].partial_cmp(&values[*b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j averaged.
        let r = (i + 1 + j) as f64 / 2.0;
        for k in &order[i..j] {
            ranks[*k] = r;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve: the probability a random positive outscores a
/// random negative, ties counting one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let p = labels.iter().filter(|l| **l).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::invalid("labels", format!("AUROC needs both classes ({p} positive, {n} negative)")));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, l)| **l).map(|(r, _)| r).sum();
    let (p, n) = (p as f64, n as f64);
    Ok(((rank_sum - p * (p + 1.0) / 2.0) / (p * n)).clamp(0.0, 1.0))
}

/// Average precision: `Σ (R_k − R_{k−1}) P_k` over descending score
/// thresholds, each group of tied scores forming one threshold.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let total_pos = labels.iter().filter(|l| **l).count();
    if total_pos == 0 {
        return Err(Error::invalid("labels", "AUPRC needs at least one positive"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap_or(Ordering::Equal));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_tp = 0;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            group_tp += usize::from(labels[order[j]]);
            j += 1;
        }
        tp += group_tp;
        seen += j - i;
        if group_tp > 0 {
            ap += (group_tp as f64 / total_pos as f64) * (tp as f64 / seen as f64);
        }
        i = j;
    }
    Ok(ap.clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionStrategy {
    ClsOnly,
    SegOnly,
    Average,
    Or,
    And,
}

impl FusionStrategy {
    pub const ALL: [FusionStrategy; 5] =
        [FusionStrategy::ClsOnly, FusionStrategy::SegOnly, FusionStrategy::Average, FusionStrategy::Or, FusionStrategy::And];

    pub fn name(self) -> &'static str {
        match self {
            FusionStrategy::ClsOnly => "cls-only",
            FusionStrategy::SegOnly => "seg-only",
            FusionStrategy::Average => "average",
            FusionStrategy::Or => "or",
            FusionStrategy::And => "and",
        }
    }
}

impl fmt::Display for FusionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let key = match key.as_str() {
            "cls" | "classification" => "cls-only",
            "seg" | "segmentation" => "seg-only",
            "avg" | "mean" => "average",
            "max" => "or",
            "min" => "and",
            k => k,
        };
        FusionStrategy::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| Error::invalid("fusion strategy", format!("unknown strategy {s:?}")))
    }
}

pub fn fuse(cls_score: f64, seg_max: f64, strategy: FusionStrategy) -> f64 {
    match strategy {
        FusionStrategy::ClsOnly => cls_score,
        FusionStrategy::SegOnly => seg_max,
        FusionStrategy::Average => (cls_score + seg_max) / 2.0,
        FusionStrategy::Or => cls_score.max(seg_max),
        FusionStrategy::And => cls_score.min(seg_max),
    }
}


#[cfg(test)]
mod tests {
    use super::oracle::*;
    use super::*;
    use crate::rng::StreamRng;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn auroc_examples() {
        let l = [true, true, false, false];
        assert_eq!(auroc(&[0.9, 0.8, 0.3, 0.2], &l).unwrap(), 1.0);
        assert!(close(auroc(&[0.9, 0.3, 0.4, 0.2], &l).unwrap(), 0.75));
        assert_eq!(auroc(&[0.5; 4], &l).unwrap(), 0.5);
        assert!(auroc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(auroc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn auprc_examples() {
        assert!(close(auprc(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap(), 0.5 + 2.0 / 3.0 * 0.5));
        assert_eq!(auprc(&[0.9, 0.8, 0.1, 0.0], &[true, true, false, false]).unwrap(), 1.0);
        assert!(close(auprc(&[0.4; 5], &[true, false, false, true, false]).unwrap(), 0.4));
        assert!(auprc(&[0.4, 0.2], &[false, false]).is_err());
    }

    #[test]
    fn metrics_match_oracles_with_ties() {
        let mut rng = StreamRng::seed_from_u64(2024);
        for _ in 0..200 {
            let n = rng.random_range(2..=200);
            let levels = rng.random_range(2..=50);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
            labels[0] = true;
            labels[1] = false;
            assert!(close(auroc(&scores, &labels).unwrap(), auroc_pairs(&scores, &labels)));
            assert!(close(auprc(&scores, &labels).unwrap(), auprc_sweep(&scores, &labels)));
        }
    }

    #[test]
    fn fusion_formulas() {
        assert!(close(fuse(0.8, 0.4, FusionStrategy::Average), 0.6));
        assert_eq!(fuse(0.8, 0.4, FusionStrategy::Or), 0.8);
        assert_eq!(fuse(0.8, 0.4, FusionStrategy::And), 0.4);
        for s in FusionStrategy::ALL {
            assert_eq!(fuse(0.37, 0.37, s), 0.37);
            assert_eq!(s.name().parse::<FusionStrategy>().unwrap(), s);
        }
        assert_eq!("max".parse::<FusionStrategy>().unwrap(), FusionStrategy::Or);
        assert!("xor".parse::<FusionStrategy>().is_err());
    }

    proptest! {
        #[test]
        fn fusion_ordering(c in 0.0..=1.0f64, s in 0.0..=1.0f64) {
            let and = fuse(c, s, FusionStrategy::And);
            let avg = fuse(c, s, FusionStrategy::Average);
            let or = fuse(c, s, FusionStrategy::Or);
            prop_assert!(and <= avg && avg <= or);
        }

        #[test]
        fn auroc_is_rank_invariant(
            scores in proptest::collection::vec(0.0..1.0f64, 4..60),
            seed in any::<u64>(),
        ) {
            let mut rng = StreamRng::seed_from_u64(seed);
            let mut labels: Vec<bool> = scores.iter().map(|_| rng.random_bool(0.5)).collect();
            labels[0] = true;
            labels[1] = false;
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            let a = auroc(&scores, &labels).unwrap();
            prop_assert!((a - auroc(&warped, &labels).unwrap()).abs() < 1e-12);
        }
    }
}
