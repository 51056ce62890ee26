use std::path::PathBuf;

use cade_core::corrupt::{derived_record, execute, plan_corruption, DEFAULT_MAX_K, DEFAULT_REPLICATES};
use cade_core::manifest::{resolve_path, save_manifest, ConsensusRefs, DelineationRef};
use cade_core::{DatasetManifest, RgbImage, SampleRecord};
use clap::Args;
use rayon::prelude::*;

use super::{absolute, manifest_arg};
use crate::{write_jsonl, CliResult, Context, SeedArg};

pub const PLAN_FILE: &str = "corruption_plan.jsonl";

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    /// Most corruptions stacked on one copy.
    #[arg(long, default_value_t = DEFAULT_MAX_K)]
    pub max_k: usize,
}

pub fn manifest_file(name: &str) -> String {
    format!("{name}-C.jsonl")
}

/// Points a record's ground-truth paths at the original files.
fn absolute_refs(mut record: SampleRecord, manifest_path: &std::path::Path) -> SampleRecord {
    let abs = |p: &String| absolute(manifest_path, p);
    record.delineations = record.delineations.map(|ds| {
        ds.iter()
            .map(|d| DelineationRef { expert_id: d.expert_id.clone(), ll_path: abs(&d.ll_path), hl_path: abs(&d.hl_path) })
            .collect()
    });
    record.consensus = record.consensus.map(|c| ConsensusRefs {
        soft: c.soft.as_ref().map(abs),
        plausible: c.plausible.as_ref().map(abs),
        sweet: c.sweet.as_ref().map(abs),
        hard: c.hard.as_ref().map(abs),
        average: c.average.as_ref().map(abs),
    });
    record
}

pub fn run(ctx: &Context, args: CorruptArgs) -> CliResult<()> {
    let seed = args.seed.require("corrupt")?;
    let (manifest, manifest_path) = manifest_arg(ctx, &args.manifest)?;
    let plans = plan_corruption(&manifest, seed, args.replicates, args.max_k)?;
    let out_dir = ctx.create_dir(&args.out_dir)?;

    let records: Vec<SampleRecord> = ctx.install(|| {
        manifest
            .records
            .par_iter()
            .zip(plans.par_chunks(args.replicates))
            .map(|(record, plans)| -> CliResult<Vec<SampleRecord>> {
                // The whole frame is corrupted; the active-region crop stays on the record.
                let image = RgbImage::load_png(&resolve_path(&manifest_path, &record.image_path))?;
                let source = absolute_refs(record.clone(), &manifest_path);
                plans
                    .iter()
                    .map(|plan| {
                        let file = format!("{}.png", plan.output_id);
                        execute(plan, &image)?.save_png(&out_dir.join(&file))?;
                        Ok(derived_record(&source, plan, file))
                    })
                    .collect()
            })
            .collect::<CliResult<Vec<Vec<_>>>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    write_jsonl(&out_dir.join(PLAN_FILE), &plans)?;
    let derived = DatasetManifest::new(format!("{}-C", manifest.name), manifest.split, records)?;
    save_manifest(&derived, &out_dir.join(manifest_file(&manifest.name)))?;
    eprintln!("corrupt: {} outputs from {} records in {}", derived.len(), manifest.len(), out_dir.display());
    Ok(())
}
