use std::collections::BTreeMap;
use std::path::PathBuf;

use cade_core::eval::EvalReport;
use clap::Args;

use super::compare::{filter_metrics, load_reports};
use crate::plot::{render_barplot, Bar, PlotSpec};
use crate::tables::build_table;
use crate::{write_file, CliError, CliResult, Context};

pub const TABLE_CSV: &str = "table.csv";
pub const TABLE_TXT: &str = "table.txt";

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Restrict tables and plots to these metrics; comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// Metrics to draw one bar plot per test set for; comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub plot: Vec<String>,
    /// Model drawn as the dashed reference band instead of a bar.
    #[arg(long)]
    pub reference_model: Option<String>,
    /// Lower end of the plot y-axis; the upper end is 1.
    #[arg(long)]
    pub y_min: Option<f64>,
}

/// Refuses to aggregate reports that were computed from different copies of
/// a test set or that carry no input hashes.
pub fn check_provenance(reports: &[EvalReport]) -> CliResult<()> {
    let mut manifests: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
    for r in reports {
        let Some(p) = &r.provenance else {
            return Err(CliError::Validation(format!(
                "report for {} on {} has no provenance; re-run evaluate",
                r.model, r.test_set
            )));
        };
        match manifests.get(r.test_set.as_str()) {
            Some((hash, model)) if *hash != p.manifest.sha256 => {
                return Err(CliError::Validation(format!(
                    "mixed provenance: test set {} was evaluated from different manifests by {model} and {}",
                    r.test_set, r.model
                )));
            }
            Some(_) => {}
            None => {
                manifests.insert(&r.test_set, (&p.manifest.sha256, &r.model));
            }
        }
    }
    Ok(())
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn run(ctx: &Context, args: ReportArgs) -> CliResult<()> {
    if args.reports.is_empty() {
        return Err(CliError::Validation("report needs at least one --reports file".into()));
    }
    let mut reports = load_reports(ctx, &args.reports)?;
    check_provenance(&reports)?;
    filter_metrics(&mut reports, &args.metrics)?;
    let table = build_table(&reports)?;
    let out_dir = ctx.create_dir(&args.out_dir)?;
    write_file(&out_dir.join(TABLE_CSV), table.to_csv().as_bytes())?;
    write_file(&out_dir.join(TABLE_TXT), table.to_text().as_bytes())?;

    if let Some(r) = &args.reference_model {
        if !table.rows.iter().any(|(m, _)| m == r) {
            return Err(CliError::Validation(format!("reference model {r:?} has no reports")));
        }
    }
    for metric in &args.plot {
        let cols: Vec<usize> = (0..table.columns.len()).filter(|c| &table.columns[*c].1 == metric).collect();
        if cols.is_empty() {
            return Err(CliError::Validation(format!("cannot plot {metric:?}: no report has it")));
        }
        for c in cols {
            let test_set = &table.columns[c].0;
            let mut bars = Vec::new();
            let mut reference = None;
            for (model, cells) in &table.rows {
                let s = &cells[c];
                if args.reference_model.as_deref() == Some(model.as_str()) {
                    reference = Some((s.mean, s.std));
                } else {
                    bars.push(Bar { label: model.clone(), mean: s.mean, std: s.std });
                }
            }
            let lowest = bars
                .iter()
                .map(|b| b.mean - b.std)
                .chain(reference.map(|(m, s)| m - s))
                .fold(1.0f64, f64::min);
            let y_min = args.y_min.unwrap_or(((lowest - 0.05) * 10.0).floor() / 10.0).clamp(0.0, 0.99);
            let spec = PlotSpec { title: format!("{metric} on {test_set}"), bars, reference, y_range: (y_min, 1.0) };
            let file = format!("{}_{}.svg", file_safe(metric), file_safe(test_set));
            render_barplot(&spec, &out_dir.join(file))?;
        }
    }
    eprintln!("report: {} models x {} cells in {}", table.rows.len(), table.columns.len(), out_dir.display());
    Ok(())
}
