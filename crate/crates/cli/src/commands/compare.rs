use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use cade_core::eval::EvalReport;
use cade_core::stats::{compare_models, grids_from_reports, Comparison, DEFAULT_ALPHA};
use clap::Args;

use crate::{write_file, write_json, CliError, CliResult, Context};

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Evaluation reports of every model on every test set.
    #[arg(long, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// Reference model; defaults to the model of the first report.
    #[arg(long)]
    pub reference: Option<String>,
    /// Restrict the grid to these metrics; comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the results as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub(crate) fn load_reports(ctx: &Context, paths: &[PathBuf]) -> CliResult<Vec<EvalReport>> {
    paths.iter().map(|p| Ok(EvalReport::load(&ctx.path(p))?)).collect()
}

/// Keeps only the requested metrics, failing on names no report carries.
pub(crate) fn filter_metrics(reports: &mut [EvalReport], metrics: &[String]) -> CliResult<()> {
    if metrics.is_empty() {
        return Ok(());
    }
    let known: BTreeSet<&String> = reports.iter().flat_map(|r| r.metrics.keys()).collect();
    if let Some(m) = metrics.iter().find(|m| !known.contains(m)) {
        return Err(CliError::Validation(format!("no report has metric {m:?}")));
    }
    for r in reports.iter_mut() {
        r.metrics.retain(|k, _| metrics.contains(k));
    }
    Ok(())
}

pub fn to_csv(c: &Comparison) -> String {
    let mut s = String::from("grouping,key,comparator,n_effective,method,w_statistic,p_raw,p_adjusted,significant,degenerate\n");
    for e in &c.entries {
        let g = match e.grouping {
            cade_core::stats::Grouping::PerMetric => "per-metric",
            cade_core::stats::Grouping::PerTestSet => "per-test-set",
        };
        let r = &e.result;
        let _ = writeln!(
            s,
            "{g},{},{},{},{},{},{},{},{},{}",
            e.key,
            e.comparator,
            r.n_effective,
            r.method,
            r.w_statistic,
            r.p_raw,
            r.p_adjusted.unwrap_or(r.p_raw),
            e.significant,
            r.degenerate
        );
    }
    s
}

pub fn run(ctx: &Context, args: CompareArgs) -> CliResult<()> {
    if args.reports.len() < 2 {
        return Err(CliError::Validation("compare needs reports of at least two models".into()));
    }
    let Some(out) = &args.out else {
        return Err(CliError::Validation("compare needs --out".into()));
    };
    let mut reports = load_reports(ctx, &args.reports)?;
    filter_metrics(&mut reports, &args.metrics)?;
    let reference = args.reference.clone().unwrap_or_else(|| reports[0].model.clone());
    let grids = grids_from_reports(&reports)?;
    let comparison = compare_models(&grids, &reference, args.alpha)?;
    write_json(&ctx.path(out), &comparison)?;
    if let Some(p) = &args.csv {
        write_file(&ctx.path(p), to_csv(&comparison).as_bytes())?;
    }
    let significant = comparison.entries.iter().filter(|e| e.significant).count();
    eprintln!(
        "compare: {reference} vs {} model(s), {} tests, {significant} significant at alpha {}",
        comparison.comparators.len(),
        comparison.entries.len(),
        comparison.alpha
    );
    Ok(())
}
