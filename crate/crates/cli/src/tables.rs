//! Result tables: models as rows, `(test set, metric)` cells as columns.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use cade_core::eval::{EvalReport, MetricSummary};

use crate::{CliError, CliResult};

pub type Column = (String, String);

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<(String, Vec<MetricSummary>)>,
}

/// `mean±std` at three decimals with the std's leading zero dropped, as in
/// `0.974±.004`.
pub fn format_cell(mean: f64, std: f64) -> String {
    let s = format!("{std:.3}");
    let s = s.strip_prefix('0').unwrap_or(&s);
    format!("{mean:.3}±{s}")
}

/// Collects reports into a table. Every model must cover the same cells.
pub fn build_table(reports: &[EvalReport]) -> CliResult<ResultTable> {
    let mut by_model: BTreeMap<&str, BTreeMap<Column, &MetricSummary>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in reports {
        if !by_model.contains_key(r.model.as_str()) {
            order.push(&r.model);
        }
        let cells = by_model.entry(&r.model).or_default();
        for (metric, s) in &r.metrics {
            if cells.insert((r.test_set.clone(), metric.clone()), s).is_some() {
                return Err(CliError::Validation(format!(
                    "model {} has two reports for test set {}",
                    r.model, r.test_set
                )));
            }
        }
    }
    let Some(first) = order.first() else {
        return Err(CliError::Validation("no reports".into()));
    };
    let columns: Vec<Column> = by_model[first].keys().cloned().collect();
    let expected: BTreeSet<&Column> = columns.iter().collect();
    let mut rows = Vec::new();
    for model in &order {
        let cells = &by_model[model];
        if cells.keys().collect::<BTreeSet<_>>() != expected {
            return Err(CliError::Validation(format!("model {model} does not cover the same test sets and metrics as {first}")));
        }
        rows.push((model.to_string(), columns.iter().map(|c| cells[c].clone()).collect()));
    }
    Ok(ResultTable { columns, rows })
}

impl ResultTable {
    /// For each column, the rows holding the best displayed mean. Higher is
    /// better; rows equal at three decimals tie and are all marked.
    pub fn best(&self) -> Vec<BTreeSet<usize>> {
        (0..self.columns.len())
            .map(|c| {
                let shown = |r: usize| (self.rows[r].1[c].mean * 1000.0).round() as i64;
                let top = (0..self.rows.len()).map(shown).max().unwrap_or(0);
                (0..self.rows.len()).filter(|r| shown(*r) == top).collect()
            })
            .collect()
    }

    /// Aligned plain-text table; best cells carry a trailing `*`.
    pub fn to_text(&self) -> String {
        let best = self.best();
        let mut header = vec!["model".to_string()];
        header.extend(self.columns.iter().map(|(t, m)| format!("{t}/{m}")));
        let mut lines = vec![header];
        for (i, (model, cells)) in self.rows.iter().enumerate() {
            let mut line = vec![model.clone()];
            for (c, s) in cells.iter().enumerate() {
                let mark = if best[c].contains(&i) { "*" } else { " " };
                line.push(format!("{}{mark}", format_cell(s.mean, s.std)));
            }
            lines.push(line);
        }
        let widths: Vec<usize> =
            (0..lines[0].len()).map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for line in &lines {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, w))| {
                    let pad = w - v.chars().count();
                    if c == 0 { format!("{v}{}", " ".repeat(pad)) } else { format!("{}{v}", " ".repeat(pad)) }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    /// One line per model and cell at full precision.
    pub fn to_csv(&self) -> String {
        let best = self.best();
        let mut out = String::from("model,test_set,metric,mean,std,runs,best\n");
        for (i, (model, cells)) in self.rows.iter().enumerate() {
            for (c, s) in cells.iter().enumerate() {
                let (t, m) = &self.columns[c];
                let _ = writeln!(out, "{model},{t},{m},{},{},{},{}", s.mean, s.std, s.per_run.len(), best[c].contains(&i));
            }
        }
        out
    }
}
