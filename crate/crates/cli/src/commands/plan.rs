use std::path::{Path, PathBuf};

use cade_core::manifest::{ConsensusRefs, DelineationRef, SampleRecord};
use cade_core::rng::stream;
use cade_core::training::{parse_frame_tier, plan_frame_addition, Fraction, TrainingPreset};
use cade_core::{DatasetManifest, Tier};
use clap::Args;

use super::{absolute, manifest_arg};
use crate::{write_file, write_json, CliError, CliResult, Context, SeedArg};

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Training manifest the frames are added to.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Manifest of tiered video frames.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Comma-separated frame tiers: hq, mq, lq.
    #[arg(long, value_delimiter = ',')]
    pub tiers: Vec<String>,
    /// 0.10, 0.50 or 1.00.
    #[arg(long, default_value = "0.10")]
    pub fraction: Fraction,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Combined manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Selection summary per tier.
    #[arg(long)]
    pub plan_out: Option<PathBuf>,
    /// Also write the training preset (optimizer, loss and controller constants).
    #[arg(long)]
    pub training_preset: Option<PathBuf>,
}

fn absolute_record(mut r: SampleRecord, manifest_path: &Path) -> SampleRecord {
    let abs = |p: &String| absolute(manifest_path, p);
    r.image_path = abs(&r.image_path);
    r.delineations = r.delineations.map(|ds| {
        ds.iter()
            .map(|d| DelineationRef { expert_id: d.expert_id.clone(), ll_path: abs(&d.ll_path), hl_path: abs(&d.hl_path) })
            .collect()
    });
    r.consensus = r.consensus.map(|c| ConsensusRefs {
        soft: c.soft.as_ref().map(abs),
        plausible: c.plausible.as_ref().map(abs),
        sweet: c.sweet.as_ref().map(abs),
        hard: c.hard.as_ref().map(abs),
        average: c.average.as_ref().map(abs),
    });
    r
}

fn absolute_manifest(m: DatasetManifest, path: &Path) -> CliResult<DatasetManifest> {
    let records = m.records.into_iter().map(|r| absolute_record(r, path)).collect();
    Ok(DatasetManifest::new(m.name, m.split, records)?)
}

pub fn run(ctx: &Context, args: PlanArgs) -> CliResult<()> {
    if let Some(p) = &args.training_preset {
        write_json(&ctx.path(p), &TrainingPreset::default())?;
        if args.base.is_none() && args.frames.is_none() {
            return Ok(());
        }
    }
    let seed = args.seed.require("plan")?;
    let (Some(base), Some(frames), Some(out)) = (&args.base, &args.frames, &args.out) else {
        return Err(CliError::Validation("plan needs --base, --frames and --out".into()));
    };
    if args.tiers.is_empty() {
        return Err(CliError::Validation("plan needs --tiers (hq, mq, lq)".into()));
    }
    let tiers: Vec<Tier> = args.tiers.iter().map(|t| parse_frame_tier(t)).collect::<Result<_, _>>()?;
    let (base, base_path) = manifest_arg(ctx, base)?;
    let (frames, frames_path) = manifest_arg(ctx, frames)?;
    let base = absolute_manifest(base, &base_path)?;
    let frames = absolute_manifest(frames, &frames_path)?;
    let mut rng = stream(seed, "frame-addition");
    let (combined, plan) = plan_frame_addition(&base, &frames, &tiers, args.fraction, &mut rng)?;
    write_file(&ctx.path(out), combined.to_jsonl().as_bytes())?;
    if let Some(p) = &args.plan_out {
        write_json(&ctx.path(p), &plan)?;
    }
    eprintln!("plan: {} records ({} frames added)", combined.len(), plan.total_selected());
    Ok(())
}
