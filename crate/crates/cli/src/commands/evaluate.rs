use std::collections::BTreeMap;
use std::path::PathBuf;

use cade_core::consensus::GtStrategy;
use cade_core::eval::{
    evaluate, file_sha256, load_ground_truth, EvalConfig, FileHash, FusionStrategy, PredictionSet, Provenance,
    DEFAULT_THRESHOLD,
};
use clap::Args;

use super::{crop_mask, manifest_arg};
use crate::{write_json, CliError, CliResult, Context};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Prediction CSVs, one per run (`id,cls_score,seg_max[,seg_path]`).
    #[arg(long, num_args = 1..)]
    pub pred: Vec<PathBuf>,
    /// Fusion strategies to report; comma-separated.
    #[arg(long, value_delimiter = ',', default_values = ["average", "or", "and"])]
    pub fusion: Vec<FusionStrategy>,
    /// Ground truth for mDice: soft, plausible, sweet or hard.
    #[arg(long, default_value = "plausible")]
    pub gt: GtStrategy,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Model name recorded in the report.
    #[arg(long, default_value = "model")]
    pub model: String,
    /// Test-set name; defaults to the manifest name.
    #[arg(long)]
    pub test_set: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: EvaluateArgs) -> CliResult<()> {
    let Some(manifest_arg_path) = &args.manifest else {
        return Err(CliError::Validation("evaluate needs --manifest".into()));
    };
    if args.pred.is_empty() {
        return Err(CliError::Validation("evaluate needs at least one --pred file".into()));
    }
    let Some(out) = &args.out else {
        return Err(CliError::Validation("evaluate needs --out".into()));
    };
    if !(args.threshold > 0.0 && args.threshold <= 1.0) {
        return Err(CliError::Validation(format!("--threshold {} outside (0, 1]", args.threshold)));
    }
    let (manifest, manifest_path) = manifest_arg(ctx, manifest_arg_path)?;
    let gt: BTreeMap<_, _> = load_ground_truth(&manifest, &manifest_path, args.gt)?
        .into_iter()
        .map(|(id, m)| {
            let record = manifest.get(&id).expect("ground truth comes from manifest records");
            (id, crop_mask(record, m))
        })
        .collect();
    let runs: Vec<PredictionSet> = ctx.install(|| {
        use rayon::prelude::*;
        args.pred.par_iter().map(|p| PredictionSet::load_csv(&ctx.path(p))).collect::<Result<_, _>>()
    })?;
    let cfg = EvalConfig { model: args.model.clone(), fusion: args.fusion.clone(), threshold: args.threshold, gt: args.gt };
    let mut report = evaluate(&manifest, &gt, &runs, &cfg)?;
    if let Some(name) = &args.test_set {
        report.test_set = name.clone();
    }
    let hash = |p: &PathBuf| -> CliResult<FileHash> {
        Ok(FileHash { path: p.display().to_string(), sha256: file_sha256(&ctx.path(p))? })
    };
    report.provenance = Some(Provenance {
        manifest: hash(manifest_arg_path)?,
        predictions: args.pred.iter().map(hash).collect::<CliResult<_>>()?,
    });
    write_json(&ctx.path(out), &report)?;
    eprintln!(
        "evaluate: {} on {} over {} run(s), {} metrics",
        report.model,
        report.test_set,
        report.runs,
        report.metrics.len()
    );
    Ok(())
}
