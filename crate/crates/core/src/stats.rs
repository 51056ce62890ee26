//! Paired model comparison: Wilcoxon signed-rank tests with
//! Benjamini-Hochberg adjustment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::eval::{midranks, EvalReport};

/// Largest number of non-zero differences handled by exact enumeration.
pub const EXACT_MAX_N: usize = 25;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApprox,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::NormalApprox => "normal-approx",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `min(W+, W-)`.
    pub w_statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    /// Two-sided p-value.
    pub p_raw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_adjusted: Option<f64>,
    pub method: Method,
    /// All differences were zero; the test is undefined and `p_raw` is 1.
    pub degenerate: bool,
}

/// Two-sided Wilcoxon signed-rank test on `a - b`, exact for up to
/// [`EXACT_MAX_N`] non-zero differences and normal otherwise.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    wilcoxon_with(a, b, None)
}

/// As [`wilcoxon_signed_rank`], with the method forced when `method` is set.
pub fn wilcoxon_with(a: &[f64], b: &[f64], method: Option<Method>) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(Error::invalid("paired sample", "no pairs"));
    }
    if let Some(v) = a.iter().chain(b).find(|v| !v.is_finite()) {
        return Err(Error::invalid("paired sample", format!("value {v} is not finite")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(TestResult {
            w_statistic: 0.0,
            w_plus: 0.0,
            w_minus: 0.0,
            n_effective: 0,
            p_raw: 1.0,
            p_adjusted: None,
            method: method.unwrap_or(Method::Exact),
            degenerate: true,
        });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = midranks(&abs);
    // Midranks are multiples of 1/2, so doubled ranks are exact integers.
    let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
    let plus2: u64 = doubled.iter().zip(&d).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total2: u64 = doubled.iter().sum();
    let minus2 = total2 - plus2;
    let w2 = plus2.min(minus2);
    let method = method.unwrap_or(if n <= EXACT_MAX_N { Method::Exact } else { Method::NormalApprox });
    let p = match method {
        Method::Exact => exact_p(&doubled, w2),
        Method::NormalApprox => normal_p(&abs, w2 as f64 / 2.0),
    };
    Ok(TestResult {
        w_statistic: w2 as f64 / 2.0,
        w_plus: plus2 as f64 / 2.0,
        w_minus: minus2 as f64 / 2.0,
        n_effective: n,
        p_raw: p.clamp(f64::MIN_POSITIVE, 1.0),
        p_adjusted: None,
        method,
        degenerate: false,
    })
}

/// `min(1, 2 P(W+ <= w))` under random signs, by counting subsets of the
/// doubled ranks.
fn exact_p(doubled: &[u64], w2: u64) -> f64 {
    let total: usize = doubled.iter().sum::<u64>() as usize;
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let tail: f64 = counts[..=w2 as usize].iter().sum();
    (2.0 * tail / 2f64.powi(doubled.len() as i32)).min(1.0)
}

/// Normal approximation with continuity and tie correction.
fn normal_p(abs: &[f64], w: f64) -> f64 {
    let n = abs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite differences"));
    let mut ties = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        let t = j as f64;
        ties += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = p_values.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::invalid("p-value", format!("{p} outside (0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| p_values[*a].total_cmp(&p_values[*b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p_values[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    Ok(adjusted)
}

/// Which cells form one paired sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    /// One metric, paired across test sets.
    PerMetric,
    /// One test set, paired across metrics.
    PerTestSet,
}

/// Mean metric values of one model keyed by `(test set, metric)`.
pub type ModelGrid = BTreeMap<(String, String), f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub grouping: Grouping,
    /// The metric (per-metric) or test set (per-test-set) held fixed.
    pub key: String,
    pub comparator: String,
    /// The varying cells, in pairing order.
    pub cells: Vec<String>,
    pub reference_values: Vec<f64>,
    pub comparator_values: Vec<f64>,
    pub result: TestResult,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference: String,
    pub comparators: Vec<String>,
    pub alpha: f64,
    pub entries: Vec<ComparisonEntry>,
}

/// Collects per-model grids from single-test-set reports.
pub fn grids_from_reports(reports: &[EvalReport]) -> Result<BTreeMap<String, ModelGrid>> {
    let mut grids: BTreeMap<String, ModelGrid> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for r in reports {
        if !seen.insert((r.model.clone(), r.test_set.clone())) {
            return Err(Error::invalid("reports", format!("model {} has two reports for test set {}", r.model, r.test_set)));
        }
        let grid = grids.entry(r.model.clone()).or_default();
        for (metric, s) in &r.metrics {
            grid.insert((r.test_set.clone(), metric.clone()), s.mean);
        }
    }
    Ok(grids)
}

/// Tests `reference` against every other model under both groupings. Each
/// family of BH adjustment holds the tests of all comparators for one
/// `(grouping, key)`.
pub fn compare_models(grids: &BTreeMap<String, ModelGrid>, reference: &str, alpha: f64) -> Result<Comparison> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} outside (0, 1)")));
    }
    let ref_grid = grids
        .get(reference)
        .ok_or_else(|| Error::invalid("reference", format!("no reports for model {reference}")))?;
    let comparators: Vec<String> = grids.keys().filter(|m| *m != reference).cloned().collect();
    if comparators.is_empty() {
        return Err(Error::invalid("comparison", "needs at least one comparator model"));
    }
    let cells: BTreeSet<&(String, String)> = ref_grid.keys().collect();
    for c in &comparators {
        let other: BTreeSet<&(String, String)> = grids[c].keys().collect();
        if other != cells {
            let missing = cells.symmetric_difference(&other).next().expect("sets differ");
            return Err(Error::invalid(
                "comparison grid",
                format!("models {reference} and {c} differ at test set {} metric {}", missing.0, missing.1),
            ));
        }
    }
    let test_sets: BTreeSet<&String> = cells.iter().map(|(t, _)| t).collect();
    let metrics: BTreeSet<&String> = cells.iter().map(|(_, m)| m).collect();

    let mut entries = Vec::new();
    let families = metrics
        .iter()
        .map(|m| (Grouping::PerMetric, *m, test_sets.iter().map(|t| ((*t).clone(), (*m).clone())).collect::<Vec<_>>()))
        .chain(test_sets.iter().map(|t| {
            (Grouping::PerTestSet, *t, metrics.iter().map(|m| ((*t).clone(), (*m).clone())).collect::<Vec<_>>())
        }));
    for (grouping, key, family_cells) in families {
        let labels: Vec<String> = family_cells
            .iter()
            .map(|(t, m)| if grouping == Grouping::PerMetric { t.clone() } else { m.clone() })
            .collect();
        let reference_values: Vec<f64> = family_cells.iter().map(|c| ref_grid[c]).collect();
        let mut family: Vec<ComparisonEntry> = comparators
            .iter()
            .map(|comp| {
                let comparator_values: Vec<f64> = family_cells.iter().map(|c| grids[comp][c]).collect();
                let result = wilcoxon_signed_rank(&reference_values, &comparator_values)?;
                Ok(ComparisonEntry {
                    grouping,
                    key: key.clone(),
                    comparator: comp.clone(),
                    cells: labels.clone(),
                    reference_values: reference_values.clone(),
                    comparator_values,
                    result,
                    significant: false,
                })
            })
            .collect::<Result<_>>()?;
        let raw: Vec<f64> = family.iter().map(|e| e.result.p_raw).collect();
        for (e, q) in family.iter_mut().zip(bh_adjust(&raw)?) {
            e.result.p_adjusted = Some(q);
            e.significant = !e.result.degenerate && q < alpha;
        }
        entries.extend(family);
    }
    Ok(Comparison { reference: reference.to_string(), comparators, alpha, entries })
}
