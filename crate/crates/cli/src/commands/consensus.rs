use std::path::{Path, PathBuf};

use cade_core::consensus::{dice, select_best_pair, AGREEMENT_THRESHOLD};
use cade_core::eval::{consensus_from_delineations, load_delineations};
use cade_core::manifest::{save_manifest, ConsensusRefs, SampleRecord};
use cade_core::DatasetManifest;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use super::{absolute, manifest_arg};
use crate::{write_jsonl, CliError, CliResult, Context};

pub const SUMMARY_FILE: &str = "consensus.jsonl";
const NAMES: [&str; 5] = ["soft", "plausible", "sweet", "hard", "average"];

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// soft, plausible, sweet, hard, average or all.
    #[arg(long, default_value = "all")]
    pub strategy: String,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn manifest_file(name: &str) -> String {
    format!("{name}-consensus.jsonl")
}

#[derive(Debug, Serialize)]
struct SummaryLine {
    id: String,
    experts: Vec<String>,
    /// Experts whose delineations formed the consensus.
    pair: Vec<String>,
    hl_dice: f64,
    agreement: bool,
}

fn selected(strategy: &str) -> CliResult<Vec<&'static str>> {
    let key = strategy.trim().to_ascii_lowercase();
    let key = key.trim_end_matches("-spot");
    if key == "all" {
        return Ok(NAMES.to_vec());
    }
    NAMES
        .iter()
        .find(|n| **n == key)
        .map(|n| vec![*n])
        .ok_or_else(|| CliError::Validation(format!("unknown consensus strategy {strategy:?}; expected one of {NAMES:?} or all")))
}

fn process(
    record: &SampleRecord,
    manifest_path: &Path,
    names: &[&str],
    out_dir: &Path,
) -> CliResult<(SampleRecord, Option<SummaryLine>)> {
    let mut out = record.clone();
    out.image_path = absolute(manifest_path, &record.image_path);
    let ds = load_delineations(record, manifest_path)?;
    out.delineations = record.delineations.as_ref().map(|refs| {
        refs.iter()
            .map(|d| cade_core::manifest::DelineationRef {
                expert_id: d.expert_id.clone(),
                ll_path: absolute(manifest_path, &d.ll_path),
                hl_path: absolute(manifest_path, &d.hl_path),
            })
            .collect()
    });
    let Some(set) = consensus_from_delineations(&record.id, &ds)? else {
        out.consensus = None;
        return Ok((out, None));
    };
    let (pair, hl_dice) = match ds.as_slice() {
        [a] => (vec![a.expert_id.clone()], 1.0),
        [a, b] => (vec![a.expert_id.clone(), b.expert_id.clone()], dice(&a.hl, &b.hl)?),
        [a, b, c] => {
            let ((i, j), d) = select_best_pair(a, b, c)?;
            (vec![ds[i].expert_id.clone(), ds[j].expert_id.clone()], d)
        }
        _ => unreachable!("consensus_from_delineations rejects more than three experts"),
    };
    let mut refs = ConsensusRefs::default();
    for name in names {
        let file = format!("{}_{name}.png", record.id);
        let path = out_dir.join(&file);
        match *name {
            "soft" => (set.soft.save_png(&path)?, refs.soft = Some(file)),
            "plausible" => (set.plausible.save_png(&path)?, refs.plausible = Some(file)),
            "sweet" => (set.sweet.save_png(&path)?, refs.sweet = Some(file)),
            "hard" => (set.hard.save_png(&path)?, refs.hard = Some(file)),
            _ => (set.average.save_png(&path)?, refs.average = Some(file)),
        };
    }
    out.consensus = Some(refs);
    let summary = SummaryLine {
        id: record.id.clone(),
        experts: ds.iter().map(|d| d.expert_id.clone()).collect(),
        pair,
        hl_dice,
        agreement: hl_dice >= AGREEMENT_THRESHOLD,
    };
    Ok((out, Some(summary)))
}

pub fn run(ctx: &Context, args: ConsensusArgs) -> CliResult<()> {
    let names = selected(&args.strategy)?;
    let (manifest, manifest_path) = manifest_arg(ctx, &args.manifest)?;
    let out_dir = ctx.create_dir(&args.out_dir)?;
    let results: Vec<(SampleRecord, Option<SummaryLine>)> = ctx.install(|| {
        manifest
            .records
            .par_iter()
            .map(|r| process(r, &manifest_path, &names, &out_dir))
            .collect::<CliResult<_>>()
    })?;
    let (records, summaries): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summaries: Vec<SummaryLine> = summaries.into_iter().flatten().collect();
    write_jsonl(&out_dir.join(SUMMARY_FILE), &summaries)?;
    let derived = DatasetManifest::new(manifest.name.clone(), manifest.split, records)?;
    save_manifest(&derived, &out_dir.join(manifest_file(&manifest.name)))?;
    let disagreeing = summaries.iter().filter(|s| !s.agreement).count();
    eprintln!(
        "consensus: {} of {} records have delineations; {disagreeing} below the agreement threshold",
        summaries.len(),
        manifest.len()
    );
    Ok(())
}
