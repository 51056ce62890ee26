//! Per-run metrics, aggregation over runs, and augmented validation.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{auprc, auroc, fuse, FusionStrategy};
use super::predictions::{PredictionRecord, PredictionSet};
use crate::augment::{Pipeline, PipelinePreset};
use crate::consensus::{dice, GtStrategy};
use crate::error::{Error, Result};
use crate::image::{BinaryMask, RgbImage};
use crate::manifest::{DatasetManifest, SampleRecord, Split};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const AUGMENTED_DRAWS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub model: String,
    /// Strategies reported as `auroc_fused_<name>` / `auprc_fused_<name>`.
    pub fusion: Vec<FusionStrategy>,
    pub threshold: f64,
    pub gt: GtStrategy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            model: "model".into(),
            fusion: vec![FusionStrategy::Average, FusionStrategy::Or, FusionStrategy::And],
            threshold: DEFAULT_THRESHOLD,
            gt: GtStrategy::PlausibleSpot,
        }
    }
}

/// Mean Dice over the samples in `gt` between each binarized segmentation map
/// (`value >= threshold`) and its ground-truth mask.
pub fn mean_dice(predictions: &PredictionSet, gt: &BTreeMap<String, BinaryMask>, threshold: f64) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::invalid("mean dice", "no sample carries a ground-truth mask"));
    }
    let mut total = 0.0;
    for (id, mask) in gt {
        let pred = predictions.get(id).ok_or_else(|| Error::MissingPrediction(id.clone()))?;
        let map = pred
            .seg_map
            .as_ref()
            .ok_or_else(|| Error::invalid("mean dice", format!("sample {id} has a mask but no segmentation map")))?;
        total += dice(&map.binarize(threshold), mask)?;
    }
    Ok(total / gt.len() as f64)
}

/// All metrics of one run, keyed by metric name.
pub fn run_metrics(
    manifest: &DatasetManifest,
    gt: &BTreeMap<String, BinaryMask>,
    predictions: &PredictionSet,
    cfg: &EvalConfig,
) -> Result<BTreeMap<String, f64>> {
    let mut labels = Vec::with_capacity(manifest.len());
    let mut preds: Vec<&PredictionRecord> = Vec::with_capacity(manifest.len());
    for r in &manifest.records {
        preds.push(predictions.get(&r.id).ok_or_else(|| Error::MissingPrediction(r.id.clone()))?);
        labels.push(r.label.is_positive());
    }
    let cls: Vec<f64> = preds.iter().map(|p| p.cls_score).collect();
    let seg: Vec<f64> = preds.iter().map(|p| p.seg_max).collect();
    let mut out = BTreeMap::new();
    out.insert("auroc_cls".to_string(), auroc(&cls, &labels)?);
    out.insert("auprc_cls".to_string(), auprc(&cls, &labels)?);
    out.insert("auroc_seg".to_string(), auroc(&seg, &labels)?);
    out.insert("auprc_seg".to_string(), auprc(&seg, &labels)?);
    for s in &cfg.fusion {
        let fused: Vec<f64> = preds.iter().map(|p| fuse(p.cls_score, p.seg_max, *s)).collect();
        out.insert(format!("auroc_fused_{}", s.name()), auroc(&fused, &labels)?);
        out.insert(format!("auprc_fused_{}", s.name()), auprc(&fused, &labels)?);
    }
    let eligible: BTreeMap<String, BinaryMask> =
        gt.iter().filter(|(id, _)| manifest.get(id).is_some()).map(|(k, v)| (k.clone(), v.clone())).collect();
    // Runs without any segmentation map report no mdice; partial coverage of
    // the GT-bearing samples is an error.
    if preds.iter().any(|p| p.seg_map.is_some()) && !eligible.is_empty() {
        let with_maps = eligible.keys().filter(|id| predictions.get(id).is_some_and(|p| p.seg_map.is_some())).count();
        if with_maps < eligible.len() {
            return Err(Error::invalid(
                "mean dice",
                format!("{} of {} GT-bearing samples lack a segmentation map", eligible.len() - with_maps, eligible.len()),
            ));
        }
        out.insert("mdice".to_string(), mean_dice(predictions, &eligible, cfg.threshold)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub per_run: Vec<f64>,
}

impl MetricSummary {
    pub fn from_runs(per_run: Vec<f64>) -> Result<Self> {
        let n = per_run.len();
        if n == 0 {
            return Err(Error::invalid("runs", "at least one run is required"));
        }
        let mean = per_run.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (per_run.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Ok(MetricSummary { mean, std, per_run })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileHash { path: path.display().to_string(), sha256: file_sha256(path)? })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest: FileHash,
    pub predictions: Vec<FileHash>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub test_set: String,
    pub model: String,
    pub runs: usize,
    /// Set when only one run was given and every std is 0 by convention.
    pub single_run: bool,
    pub gt: GtStrategy,
    pub threshold: f64,
    pub metrics: BTreeMap<String, MetricSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl EvalReport {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), line: e.line(), message: e.to_string() })
    }

    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.mean)
    }
}

/// Metrics for every run, then mean and sample std across runs.
pub fn evaluate(
    manifest: &DatasetManifest,
    gt: &BTreeMap<String, BinaryMask>,
    runs: &[PredictionSet],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(Error::invalid("runs", "at least one prediction run is required"));
    }
    let per_run: Vec<BTreeMap<String, f64>> =
        runs.iter().map(|r| run_metrics(manifest, gt, r, cfg)).collect::<Result<_>>()?;
    let keys: Vec<&String> = per_run[0].keys().collect();
    if let Some((i, _)) = per_run.iter().enumerate().find(|(_, m)| m.keys().collect::<Vec<_>>() != keys) {
        return Err(Error::invalid("runs", format!("run {} reports a different metric set than run 1", i + 1)));
    }
    let metrics = keys
        .into_iter()
        .map(|k| Ok((k.clone(), MetricSummary::from_runs(per_run.iter().map(|m| m[k]).collect())?)))
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        test_set: manifest.name.clone(),
        model: cfg.model.clone(),
        runs: runs.len(),
        single_run: runs.len() == 1,
        gt: cfg.gt,
        threshold: cfg.threshold,
        metrics,
        provenance: None,
    })
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// A validation image with its label record and optional evaluation mask.
#[derive(Clone, Debug)]
pub struct ValidationSample {
    pub record: SampleRecord,
    pub image: RgbImage,
    pub gt: Option<BinaryMask>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedValidation {
    pub seeds: Vec<u64>,
    pub draws: Vec<BTreeMap<String, f64>>,
    pub mean: BTreeMap<String, f64>,
}

/// Evaluates the model on one augmented copy of the validation set per seed
/// and averages each metric over the copies. Masks follow the geometric
/// transforms of their images.
pub fn augmented_validation<F, E>(
    samples: &[ValidationSample],
    mut callback: F,
    preset: PipelinePreset,
    seeds: [u64; AUGMENTED_DRAWS],
    cfg: &EvalConfig,
) -> Result<AugmentedValidation>
where
    F: FnMut(&SampleRecord, &RgbImage) -> std::result::Result<PredictionRecord, E>,
    E: Display,
{
    let pipeline = Pipeline::new(preset);
    let records: Vec<SampleRecord> = samples.iter().map(|s| s.record.clone()).collect();
    let manifest = DatasetManifest::new("augmented-validation", Split::Validation, records)?;
    let mut draws = Vec::with_capacity(AUGMENTED_DRAWS);
    for seed in seeds {
        let mut preds = Vec::with_capacity(samples.len());
        let mut gt = BTreeMap::new();
        for s in samples {
            let id = &s.record.id;
            let out = pipeline.apply(&s.image, s.gt.as_ref(), id, seed)?;
            let mut p = callback(&s.record, &out.image)
                .map_err(|e| Error::Callback { id: id.clone(), message: e.to_string() })?;
            p.id = id.clone();
            preds.push(p);
            if let Some(m) = out.mask {
                gt.insert(id.clone(), m);
            }
        }
        draws.push(run_metrics(&manifest, &gt, &PredictionSet::new(preds)?, cfg)?);
    }
    let mut mean = BTreeMap::new();
    for k in draws[0].keys() {
        let vals: Option<Vec<f64>> = draws.iter().map(|d| d.get(k).copied()).collect();
        let vals = vals.ok_or_else(|| Error::invalid("augmented validation", format!("metric {k} missing from a draw")))?;
        mean.insert(k.clone(), vals.iter().sum::<f64>() / vals.len() as f64);
    }
    Ok(AugmentedValidation { seeds: seeds.to_vec(), draws, mean })
}
