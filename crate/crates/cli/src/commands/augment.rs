use std::path::PathBuf;

use cade_core::augment::{pretrain_views, AppliedTransform, Flavor, Pipeline, PipelinePreset, DEFAULT_N_LOCAL};
use cade_core::consensus::GtStrategy;
use cade_core::eval::ground_truth_mask;
use cade_core::manifest::{save_manifest, ConsensusRefs, SampleRecord};
use cade_core::DatasetManifest;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use super::{crop_mask, manifest_arg, record_image};
use crate::{write_jsonl, CliError, CliResult, Context, SeedArg};

pub const LOG_FILE: &str = "augment_log.jsonl";
pub const MANIFEST_FILE: &str = "augmented.jsonl";

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// train-ndsa, val-ndsa, train-dsa, val-dsa, pretrain-{ndsa,dsa}:{global1,global2,local},
    /// or pretrain-ndsa / pretrain-dsa for a full multi-crop set.
    #[arg(long)]
    pub preset: String,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Augmented copies per sample; local views per sample for multi-crop sets.
    #[arg(long)]
    pub views: Option<usize>,
    /// Restrict parameter draws to the first N options of each transform.
    #[arg(long)]
    pub val_cap: Option<usize>,
    /// Augment this ground-truth mask (soft, plausible, sweet, hard) with each image.
    #[arg(long)]
    pub mask: Option<GtStrategy>,
}

#[derive(Debug, Serialize)]
struct LogLine {
    id: String,
    output_id: String,
    view: String,
    preset: String,
    seed: u64,
    transforms: Vec<AppliedTransform>,
}

enum Mode {
    Single(Pipeline),
    MultiCrop(Flavor),
}

pub fn run(ctx: &Context, args: AugmentArgs) -> CliResult<()> {
    let seed = args.seed.require("augment")?;
    let (manifest, manifest_path) = manifest_arg(ctx, &args.manifest)?;
    let mode = match args.preset.to_ascii_lowercase().as_str() {
        "pretrain-ndsa" => Mode::MultiCrop(Flavor::Ndsa),
        "pretrain-dsa" => Mode::MultiCrop(Flavor::Dsa),
        name => {
            let mut p = Pipeline::new(name.parse::<PipelinePreset>()?);
            if let Some(cap) = args.val_cap {
                p = p.with_option_cap(cap)?;
            }
            Mode::Single(p)
        }
    };
    if let Some(0) = args.views {
        return Err(CliError::Validation("--views must be at least 1".into()));
    }
    if matches!(mode, Mode::MultiCrop(_)) && (args.mask.is_some() || args.val_cap.is_some()) {
        return Err(CliError::Validation("multi-crop sets take neither --mask nor --val-cap".into()));
    }
    let out_dir = ctx.create_dir(&args.out_dir)?;

    let per_record: Vec<(Vec<LogLine>, Vec<SampleRecord>)> = ctx.install(|| {
        manifest
            .records
            .par_iter()
            .map(|record| -> CliResult<(Vec<LogLine>, Vec<SampleRecord>)> {
                let image = record_image(record, &manifest_path)?;
                match &mode {
                    Mode::MultiCrop(flavor) => {
                        let n_local = args.views.unwrap_or(DEFAULT_N_LOCAL);
                        let set = pretrain_views(&image, *flavor, n_local, &record.id, seed)?;
                        let names = ["global1".to_string(), "global2".to_string()]
                            .into_iter()
                            .chain((0..n_local).map(|i| format!("local{i}")));
                        let views = [&set.global1, &set.global2].into_iter().chain(set.locals.iter());
                        let mut logs = Vec::new();
                        for ((name, view), log) in names.zip(views).zip(set.logs) {
                            let output_id = format!("{}_{name}", record.id);
                            view.save_png(&out_dir.join(format!("{output_id}.png")))?;
                            logs.push(LogLine {
                                id: record.id.clone(),
                                output_id,
                                view: name,
                                preset: args.preset.to_ascii_lowercase(),
                                seed,
                                transforms: log,
                            });
                        }
                        Ok((logs, Vec::new()))
                    }
                    Mode::Single(pipeline) => {
                        let mask = match args.mask {
                            Some(s) => ground_truth_mask(record, &manifest_path, s)?.map(|m| crop_mask(record, m)),
                            None => None,
                        };
                        let copies = args.views.unwrap_or(1);
                        let mut logs = Vec::new();
                        let mut records = Vec::new();
                        for j in 0..copies {
                            let (output_id, key) = if copies == 1 {
                                (record.id.clone(), record.id.clone())
                            } else {
                                (format!("{}_a{j}", record.id), format!("{}/a{j}", record.id))
                            };
                            let out = pipeline.apply(&image, mask.as_ref(), &key, seed)?;
                            let file = format!("{output_id}.png");
                            out.image.save_png(&out_dir.join(&file))?;
                            let mut consensus = None;
                            if let (Some(m), Some(s)) = (&out.mask, args.mask) {
                                let mask_file = format!("{output_id}_mask.png");
                                m.save_png(&out_dir.join(&mask_file))?;
                                let mut refs = ConsensusRefs::default();
                                match s {
                                    GtStrategy::SoftSpot => refs.soft = Some(mask_file),
                                    GtStrategy::SweetSpot => refs.sweet = Some(mask_file),
                                    GtStrategy::HardSpot => refs.hard = Some(mask_file),
                                    _ => refs.plausible = Some(mask_file),
                                }
                                consensus = Some(refs);
                            }
                            records.push(SampleRecord {
                                id: output_id.clone(),
                                image_path: file,
                                crop: None,
                                delineations: None,
                                consensus,
                                ..record.clone()
                            });
                            logs.push(LogLine {
                                id: record.id.clone(),
                                output_id,
                                view: pipeline.preset().name(),
                                preset: pipeline.preset().name(),
                                seed,
                                transforms: out.log,
                            });
                        }
                        Ok((logs, records))
                    }
                }
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let (logs, records): (Vec<Vec<LogLine>>, Vec<Vec<SampleRecord>>) = per_record.into_iter().unzip();
    let logs: Vec<LogLine> = logs.into_iter().flatten().collect();
    write_jsonl(&out_dir.join(LOG_FILE), &logs)?;
    let records: Vec<SampleRecord> = records.into_iter().flatten().collect();
    if !records.is_empty() {
        let derived = DatasetManifest::new(format!("{}-aug", manifest.name), manifest.split, records)?;
        save_manifest(&derived, &out_dir.join(MANIFEST_FILE))?;
    }
    eprintln!("augment: {} outputs from {} records in {}", logs.len(), manifest.len(), out_dir.display());
    Ok(())
}
