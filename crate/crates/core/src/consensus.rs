//! Consensus ground truth from expert delineations.
//!
//! Each expert marks a lower-likelihood (LL) area and a higher-likelihood
//! (HL) area inside it. Two experts' delineations combine into four nested
//! binary masks and their average.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryMask, SoftMask};

pub const AGREEMENT_THRESHOLD: f64 = 0.30;

#[derive(Clone, Debug, PartialEq)]
pub struct ExpertDelineation {
    pub expert_id: String,
    pub ll: BinaryMask,
    pub hl: BinaryMask,
}

impl ExpertDelineation {
    /// Rejects HL pixels outside LL and mismatched sizes.
    pub fn new(expert_id: impl Into<String>, ll: BinaryMask, hl: BinaryMask) -> Result<Self> {
        let expert_id = expert_id.into();
        check_dims(ll.dims(), hl.dims())?;
        if !hl.is_subset_of(&ll)? {
            return Err(Error::invalid(
                "delineation",
                format!("expert {expert_id}: higher-likelihood area extends outside the lower-likelihood area"),
            ));
        }
        Ok(ExpertDelineation { expert_id, ll, hl })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusSet {
    pub soft: BinaryMask,
    pub plausible: BinaryMask,
    pub sweet: BinaryMask,
    pub hard: BinaryMask,
    pub average: SoftMask,
}

impl ConsensusSet {
    /// The four binary masks, loosest first.
    pub fn binary_masks(&self) -> [&BinaryMask; 4] {
        [&self.soft, &self.plausible, &self.sweet, &self.hard]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GtStrategy {
    SoftSpot,
    PlausibleSpot,
    SweetSpot,
    HardSpot,
    Random,
    Multiple,
    Average,
}

impl GtStrategy {
    pub const ALL: [GtStrategy; 7] = [
        GtStrategy::SoftSpot,
        GtStrategy::PlausibleSpot,
        GtStrategy::SweetSpot,
        GtStrategy::HardSpot,
        GtStrategy::Random,
        GtStrategy::Multiple,
        GtStrategy::Average,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GtStrategy::SoftSpot => "soft",
            GtStrategy::PlausibleSpot => "plausible",
            GtStrategy::SweetSpot => "sweet",
            GtStrategy::HardSpot => "hard",
            GtStrategy::Random => "random",
            GtStrategy::Multiple => "multiple",
            GtStrategy::Average => "average",
        }
    }
}

impl fmt::Display for GtStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GtStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let key = lower.trim_end_matches("-spot").trim_end_matches("spot");
        GtStrategy::ALL
            .into_iter()
            .find(|g| g.name() == key)
            .ok_or_else(|| Error::invalid("gt strategy", format!("unknown strategy {s:?}")))
    }
}

/// `2|a∩b| / (|a|+|b|)`, with two empty masks counting as full agreement.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let (mut inter, mut total) = (0usize, 0usize);
    for (x, y) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(*x && *y);
        total += usize::from(*x) + usize::from(*y);
    }
    Ok(if total == 0 { 1.0 } else { 2.0 * inter as f64 / total as f64 })
}

/// Whether two experts' HL areas overlap with Dice at least `threshold`.
pub fn check_agreement(d1: &ExpertDelineation, d2: &ExpertDelineation, threshold: f64) -> Result<bool> {
    Ok(dice(&d1.hl, &d2.hl)? >= threshold)
}

/// The zero-based pair of delineations with the highest HL Dice; ties go to
/// the lexicographically smallest pair.
pub fn select_best_pair(
    d1: &ExpertDelineation,
    d2: &ExpertDelineation,
    d3: &ExpertDelineation,
) -> Result<((usize, usize), f64)> {
    let ds = [d1, d2, d3];
    let mut best = ((0, 1), f64::NEG_INFINITY);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let d = dice(&ds[i].hl, &ds[j].hl)?;
        if d > best.1 {
            best = ((i, j), d);
        }
    }
    Ok(best)
}

pub fn build_consensus(d1: &ExpertDelineation, d2: &ExpertDelineation) -> Result<ConsensusSet> {
    check_dims(d1.ll.dims(), d2.ll.dims())?;
    for d in [d1, d2] {
        check_dims(d.ll.dims(), d.hl.dims())?;
        if !d.hl.is_subset_of(&d.ll)? {
            return Err(Error::invalid(
                "delineation",
                format!("expert {}: higher-likelihood area extends outside the lower-likelihood area", d.expert_id),
            ));
        }
    }
    let (w, h) = d1.ll.dims();
    let (ll1, ll2, hl1, hl2) = (d1.ll.bits(), d2.ll.bits(), d1.hl.bits(), d2.hl.bits());
    let n = w * h;
    let mut soft = Vec::with_capacity(n);
    let mut plausible = Vec::with_capacity(n);
    let mut sweet = Vec::with_capacity(n);
    let mut hard = Vec::with_capacity(n);
    let mut average = Vec::with_capacity(n);
    for i in 0..n {
        let s = ll1[i] || ll2[i];
        let p = (ll1[i] && ll2[i]) || hl1[i] || hl2[i];
        let sw = hl1[i] || hl2[i];
        let hd = hl1[i] && hl2[i];
        soft.push(s);
        plausible.push(p);
        sweet.push(sw);
        hard.push(hd);
        let votes = u8::from(s) + u8::from(p) + u8::from(sw) + u8::from(hd);
        average.push(f64::from(votes) / 4.0);
    }
    Ok(ConsensusSet {
        soft: BinaryMask::new(w, h, soft)?,
        plausible: BinaryMask::new(w, h, plausible)?,
        sweet: BinaryMask::new(w, h, sweet)?,
        hard: BinaryMask::new(w, h, hard)?,
        average: SoftMask::new(w, h, average)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainingTarget {
    Binary(BinaryMask),
    Soft(SoftMask),
    Multiple([BinaryMask; 4]),
}

pub fn training_target<R: Rng + ?Sized>(set: &ConsensusSet, strategy: GtStrategy, rng: &mut R) -> TrainingTarget {
    match strategy {
        GtStrategy::SoftSpot => TrainingTarget::Binary(set.soft.clone()),
        GtStrategy::PlausibleSpot => TrainingTarget::Binary(set.plausible.clone()),
        GtStrategy::SweetSpot => TrainingTarget::Binary(set.sweet.clone()),
        GtStrategy::HardSpot => TrainingTarget::Binary(set.hard.clone()),
        GtStrategy::Random => TrainingTarget::Binary(set.binary_masks()[rng.random_range(0..4)].clone()),
        GtStrategy::Multiple => TrainingTarget::Multiple(set.binary_masks().map(|m| m.clone())),
        GtStrategy::Average => TrainingTarget::Soft(set.average.clone()),
    }
}

/// Pixelwise intersection of three delineations.
pub fn born_consensus(masks: &[BinaryMask; 3]) -> Result<BinaryMask> {
    masks[0].and(&masks[1])?.and(&masks[2])
}

/// Pixels marked by at least `quorum` of the masks.
pub fn argos_consensus(masks: &[BinaryMask], quorum: usize) -> Result<BinaryMask> {
    if quorum == 0 || quorum > masks.len() {
        return Err(Error::invalid(
            "argos consensus",
            format!("quorum {quorum} must lie in 1..={}", masks.len()),
        ));
    }
    let (w, h) = masks[0].dims();
    for m in masks {
        check_dims((w, h), m.dims())?;
    }
    let bits = (0..w * h)
        .map(|i| masks.iter().filter(|m| m.bits()[i]).count() >= quorum)
        .collect();
    BinaryMask::new(w, h, bits)
}

/// 8-bit encoding of an average mask: `round(255 v)`.
pub fn average_to_u8(mask: &SoftMask) -> Vec<u8> {
    mask.values().iter().map(|v| (v * 255.0).round() as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use proptest::prelude::*;
    use rand::SeedableRng;

    /// A 1-pixel-high strip where each letter names one pixel.
    fn strip(pixels: &str) -> BinaryMask {
        BinaryMask::from_fn(6, 1, |x, _| pixels.contains((b'a' + x as u8) as char))
    }

    fn expert(id: &str, ll: &str, hl: &str) -> ExpertDelineation {
        ExpertDelineation::new(id, strip(ll), strip(hl)).unwrap()
    }

    fn mask_with(n_on: usize, offset: usize) -> BinaryMask {
        BinaryMask::from_fn(10, 1, |x, _| x >= offset && x < offset + n_on)
    }

    #[test]
    fn dice_examples() {
        assert_eq!(dice(&strip("abc"), &strip("abc")).unwrap(), 1.0);
        assert_eq!(dice(&strip("ab"), &strip("cd")).unwrap(), 0.0);
        // |a| = 4, |b| = 6, |a∩b| = 3.
        let a = mask_with(4, 0);
        let b = mask_with(6, 1);
        assert!((dice(&a, &b).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(dice(&strip(""), &strip("")).unwrap(), 1.0);
        assert!(dice(&strip("a"), &BinaryMask::empty(5, 1)).is_err());
    }

    #[test]
    fn agreement_boundary_is_inclusive() {
        let a = expert("1", "abcdef", "abc");
        assert!(check_agreement(&a, &a, AGREEMENT_THRESHOLD).unwrap());
        let b = expert("2", "abcdef", "def");
        assert!(!check_agreement(&a, &b, AGREEMENT_THRESHOLD).unwrap());
        // |hl1| = 10, |hl2| = 10, overlap 3: Dice = 0.3 exactly.
        let hl1 = BinaryMask::from_fn(20, 1, |x, _| x < 10);
        let hl2 = BinaryMask::from_fn(20, 1, |x, _| (7..17).contains(&x));
        let all = BinaryMask::from_fn(20, 1, |_, _| true);
        let d1 = ExpertDelineation::new("1", all.clone(), hl1).unwrap();
        let d2 = ExpertDelineation::new("2", all, hl2).unwrap();
        assert_eq!(dice(&d1.hl, &d2.hl).unwrap(), 0.3);
        assert!(check_agreement(&d1, &d2, AGREEMENT_THRESHOLD).unwrap());
    }

    #[test]
    fn best_pair_selection() {
        let strip_of = |on: &[usize]| BinaryMask::from_fn(30, 1, |x, _| on.contains(&x));
        let all = BinaryMask::from_fn(30, 1, |_, _| true);
        let d = |on: &[usize]| ExpertDelineation::new("x", all.clone(), strip_of(on)).unwrap();
        // Ten pixels each; overlaps 1 (pair 1-2), 5 (pair 1-3), 4 (pair 2-3).
        let h1: Vec<usize> = (0..10).collect();
        let h2: Vec<usize> = [9, 10, 11, 12, 20, 21, 22, 23, 24, 25].to_vec();
        let h3: Vec<usize> = (5..15).collect();
        let (d1, d2, d3) = (d(&h1), d(&h2), d(&h3));
        assert!((dice(&d1.hl, &d2.hl).unwrap() - 0.1).abs() < 1e-12);
        assert!((dice(&d1.hl, &d3.hl).unwrap() - 0.5).abs() < 1e-12);
        assert!((dice(&d2.hl, &d3.hl).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(select_best_pair(&d1, &d2, &d3).unwrap().0, (0, 2));

        assert_eq!(select_best_pair(&d1, &d1, &d1).unwrap().0, (0, 1));
        assert_eq!(select_best_pair(&d1, &d2, &d1).unwrap(), ((0, 2), 1.0));
    }

    #[test]
    fn consensus_set_algebra() {
        let c = build_consensus(&expert("1", "abc", "b"), &expert("2", "bcd", "c")).unwrap();
        assert_eq!(c.soft, strip("abcd"));
        assert_eq!(c.plausible, strip("bc"));
        assert_eq!(c.sweet, strip("bc"));
        assert_eq!(c.hard, strip(""));
    }

    #[test]
    fn identical_experts_collapse() {
        let d = expert("1", "abcd", "bc");
        let c = build_consensus(&d, &d).unwrap();
        assert_eq!(c.soft, d.ll);
        assert_eq!(c.plausible, d.ll);
        assert_eq!(c.sweet, d.hl);
        assert_eq!(c.hard, d.hl);
    }

    #[test]
    fn disjoint_lower_likelihood_areas() {
        let c = build_consensus(&expert("1", "ab", "a"), &expert("2", "def", "e")).unwrap();
        assert_eq!(c.plausible, c.sweet);
        assert_eq!(c.plausible, strip("ae"));
    }

    #[test]
    fn invalid_delineations_are_rejected() {
        assert!(ExpertDelineation::new("1", strip("ab"), strip("c")).is_err());
        let bad = ExpertDelineation { expert_id: "x".into(), ll: strip("a"), hl: strip("b") };
        assert!(build_consensus(&bad, &expert("2", "a", "a")).is_err());
        let small = ExpertDelineation::new("s", BinaryMask::empty(3, 1), BinaryMask::empty(3, 1)).unwrap();
        assert!(build_consensus(&small, &expert("2", "a", "a")).is_err());
    }

    #[test]
    fn training_targets() {
        let c = build_consensus(&expert("1", "abcd", "bc"), &expert("2", "bcde", "cd")).unwrap();
        let mut rng = StreamRng::seed_from_u64(1);
        assert_eq!(training_target(&c, GtStrategy::HardSpot, &mut rng), TrainingTarget::Binary(c.hard.clone()));
        match training_target(&c, GtStrategy::Average, &mut rng) {
            TrainingTarget::Soft(m) => {
                // Pixel b: soft, plausible, sweet but not hard.
                assert_eq!(m.values()[1], 0.75);
            }
            other => panic!("{other:?}"),
        }
        match training_target(&c, GtStrategy::Multiple, &mut rng) {
            TrainingTarget::Multiple(ms) => assert_eq!(ms[3], c.hard),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_target_is_uniform() {
        let c = build_consensus(&expert("1", "abcd", "b"), &expert("2", "bcde", "bc")).unwrap();
        let masks = c.binary_masks();
        assert!(masks.iter().enumerate().all(|(i, m)| masks[i + 1..].iter().all(|o| o != m)));
        let mut rng = StreamRng::seed_from_u64(2);
        let mut counts = [0usize; 4];
        let draws = 10_000;
        for _ in 0..draws {
            match training_target(&c, GtStrategy::Random, &mut rng) {
                TrainingTarget::Binary(m) => counts[masks.iter().position(|x| **x == m).unwrap()] += 1,
                other => panic!("{other:?}"),
            }
        }
        for n in counts {
            assert!((n as f64 / draws as f64 - 0.25).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn born_and_argos_rules() {
        let m = strip("abc");
        assert_eq!(born_consensus(&[m.clone(), m.clone(), m.clone()]).unwrap(), m);
        assert_eq!(born_consensus(&[m.clone(), strip(""), m.clone()]).unwrap(), strip(""));
        assert_eq!(born_consensus(&[strip("ab"), strip("bc"), strip("bd")]).unwrap(), strip("b"));

        let three = [strip("ab"), strip("bc"), strip("a")];
        assert_eq!(argos_consensus(&three, 2).unwrap(), strip("ab"));
        let six = [strip("a"), strip("a"), strip("a"), strip("b"), strip("b"), strip("")];
        assert!(!argos_consensus(&six, 4).unwrap().get(0, 0));
        assert_eq!(argos_consensus(&three, 1).unwrap(), strip("abc"));
        assert!(argos_consensus(&three, 4).is_err());
        assert!(argos_consensus(&three, 0).is_err());
    }

    #[test]
    fn average_encoding() {
        let m = SoftMask::new(5, 1, vec![0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(average_to_u8(&m), vec![0, 64, 128, 191, 255]);
    }

    #[test]
    fn strategy_names_parse() {
        assert_eq!("plausible".parse::<GtStrategy>().unwrap(), GtStrategy::PlausibleSpot);
        assert_eq!("Hard-spot".parse::<GtStrategy>().unwrap(), GtStrategy::HardSpot);
        assert!("median".parse::<GtStrategy>().is_err());
    }

    fn delineation_strategy(w: usize, h: usize) -> impl Strategy<Value = ExpertDelineation> {
        // Each pixel: 0 = outside, 1 = LL only, 2 = LL and HL.
        proptest::collection::vec(0u8..3, w * h).prop_map(move |v| {
            let ll = BinaryMask::new(w, h, v.iter().map(|x| *x >= 1).collect()).unwrap();
            let hl = BinaryMask::new(w, h, v.iter().map(|x| *x == 2).collect()).unwrap();
            ExpertDelineation::new("e", ll, hl).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn nesting_and_quantization(d1 in delineation_strategy(7, 5), d2 in delineation_strategy(7, 5)) {
            let c = build_consensus(&d1, &d2).unwrap();
            prop_assert!(c.hard.is_subset_of(&c.sweet).unwrap());
            prop_assert!(c.sweet.is_subset_of(&c.plausible).unwrap());
            prop_assert!(c.plausible.is_subset_of(&c.soft).unwrap());
            for v in c.average.values() {
                prop_assert!([0.0, 0.25, 0.5, 0.75, 1.0].contains(v));
            }
            prop_assert_eq!(c, build_consensus(&d2, &d1).unwrap());
        }

        #[test]
        fn dice_symmetry(d1 in delineation_strategy(6, 6), d2 in delineation_strategy(6, 6)) {
            prop_assert_eq!(dice(&d1.ll, &d2.ll).unwrap(), dice(&d2.ll, &d1.ll).unwrap());
            if !d1.ll.is_empty() {
                prop_assert_eq!(dice(&d1.ll, &d1.ll).unwrap(), 1.0);
            }
        }

        #[test]
        fn argos_extremes(ms in proptest::collection::vec(delineation_strategy(5, 4), 1..6)) {
            let masks: Vec<BinaryMask> = ms.into_iter().map(|d| d.ll).collect();
            let mut inter = masks[0].clone();
            let mut union = masks[0].clone();
            for m in &masks[1..] {
                inter = inter.and(m).unwrap();
                union = union.or(m).unwrap();
            }
            prop_assert_eq!(argos_consensus(&masks, masks.len()).unwrap(), inter);
            prop_assert_eq!(argos_consensus(&masks, 1).unwrap(), union);
        }
    }
}
