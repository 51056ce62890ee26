//! Class-balanced batch sampling and video-frame addition.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, Tier};

/// Sample ids for one batch. Each slot picks a class with probability 1/2,
/// then a sample of that class uniformly, with replacement.
pub fn balanced_batch<R: Rng + ?Sized>(manifest: &DatasetManifest, batch_size: usize, rng: &mut R) -> Result<Vec<String>> {
    let (pos, neg): (Vec<&str>, Vec<&str>) = {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for r in &manifest.records {
            if r.label.is_positive() {
                pos.push(r.id.as_str());
            } else {
                neg.push(r.id.as_str());
            }
        }
        (pos, neg)
    };
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid(
            "balanced batch",
            format!("manifest {} lacks a class ({} positive, {} negative)", manifest.name, pos.len(), neg.len()),
        ));
    }
    Ok((0..batch_size)
        .map(|_| {
            let pool = if rng.random_bool(0.5) { &pos } else { &neg };
            pool[rng.random_range(0..pool.len())].to_string()
        })
        .collect())
}

/// Share of each tier's frames added to the training set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fraction {
    #[serde(rename = "0.10")]
    Ten,
    #[serde(rename = "0.50")]
    Fifty,
    #[serde(rename = "1.00")]
    Hundred,
}

impl Fraction {
    pub fn percent(self) -> usize {
        match self {
            Fraction::Ten => 10,
            Fraction::Fifty => 50,
            Fraction::Hundred => 100,
        }
    }

    /// `floor(available * fraction)`, in integer arithmetic.
    pub fn count(self, available: usize) -> usize {
        available * self.percent() / 100
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.percent() as f64 / 100.0)
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let value = match t.strip_suffix('%') {
            Some(p) => p.parse::<f64>().map(|v| v / 100.0),
            None => t.parse::<f64>(),
        };
        match value {
            Ok(v) if (v - 0.10).abs() < 1e-9 => Ok(Fraction::Ten),
            Ok(v) if (v - 0.50).abs() < 1e-9 => Ok(Fraction::Fifty),
            Ok(v) if (v - 1.00).abs() < 1e-9 => Ok(Fraction::Hundred),
            _ => Err(Error::invalid("fraction", format!("{s:?} is not one of 0.10, 0.50, 1.00"))),
        }
    }
}

/// Parses `hq`, `mq`, `lq` (or the full tier names).
pub fn parse_frame_tier(s: &str) -> Result<Tier> {
    match s.trim().to_ascii_lowercase().as_str() {
        "hq" | "hqframe" => Ok(Tier::HQFrame),
        "mq" | "mqframe" => Ok(Tier::MQFrame),
        "lq" | "lqframe" => Ok(Tier::LQFrame),
        _ => Err(Error::invalid("tier", format!("{s:?} is not a frame tier (hq, mq, lq)"))),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierSelection {
    pub tier: Tier,
    pub available: usize,
    pub selected: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAdditionPlan {
    pub fraction: Fraction,
    pub tiers: Vec<TierSelection>,
}

impl FrameAdditionPlan {
    pub fn total_selected(&self) -> usize {
        self.tiers.iter().map(|t| t.selected.len()).sum()
    }
}

/// Appends `floor(fraction * available)` frames of each requested tier,
/// drawn uniformly without replacement. Tiers are processed in HQ, MQ, LQ
/// order and selected frames keep their order in `frames`.
pub fn plan_frame_addition<R: Rng + ?Sized>(
    base: &DatasetManifest,
    frames: &DatasetManifest,
    tiers: &[Tier],
    fraction: Fraction,
    rng: &mut R,
) -> Result<(DatasetManifest, FrameAdditionPlan)> {
    if tiers.is_empty() {
        return Err(Error::invalid("frame addition", "no tiers requested"));
    }
    if let Some(t) = tiers.iter().find(|t| **t == Tier::Image) {
        return Err(Error::invalid("frame addition", format!("{t} is not a frame tier")));
    }
    let mut records = base.records.clone();
    let mut plan = FrameAdditionPlan { fraction, tiers: Vec::new() };
    for tier in [Tier::HQFrame, Tier::MQFrame, Tier::LQFrame] {
        if !tiers.contains(&tier) {
            continue;
        }
        let pool: Vec<_> = frames.records.iter().filter(|r| r.tier == tier).collect();
        if pool.is_empty() {
            return Err(Error::invalid(
                "frame addition",
                format!("tier {tier} has no frames in manifest {}", frames.name),
            ));
        }
        let k = fraction.count(pool.len());
        let mut picked = index::sample(rng, pool.len(), k).into_vec();
        picked.sort_unstable();
        let selected: Vec<String> = picked.iter().map(|i| pool[*i].id.clone()).collect();
        records.extend(picked.iter().map(|i| pool[*i].clone()));
        plan.tiers.push(TierSelection { tier, available: pool.len(), selected });
    }
    let name = format!("{}+frames", base.name);
    let manifest = DatasetManifest::new(name, base.split, records)?;
    Ok((manifest, plan))
}
