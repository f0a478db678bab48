//! Charts built from the CSV artifacts, and the command-line interface.

pub mod chart;
pub mod cli;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics;

pub use chart::{render_chart, write_chart, ChartSpec, Series, XAxis};
pub use cli::cli_main;

/// One row of a sweep results CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ResultRow {
    pub width: usize,
    pub lambda: f64,
    pub regularizer: String,
    pub metric: String,
    pub mean: f64,
    pub ci95: f64,
    pub n_runs: usize,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    read_rows(path.as_ref())
}

/// Interpolation width of the unregularised `lambda = 0` rows, if any width
/// reaches zero mean train error.
pub fn detect_interpolation_width(rows: &[ResultRow]) -> Option<usize> {
    let mut table: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.metric == "train_err" && r.lambda == 0.0 && r.regularizer == "none")
        .map(|r| (r.width, r.mean))
        .collect();
    table.sort_by_key(|&(w, _)| w);
    table.dedup_by_key(|&mut (w, _)| w);
    metrics::interpolation_threshold(&table, 0.0).ok()
}

/// `metric` against width, one series per `(lambda, regularizer)` pair,
/// with the detected interpolation width marked.
pub fn results_chart(rows: &[ResultRow], metric: &str) -> Result<ChartSpec> {
    let selected: Vec<&ResultRow> = rows.iter().filter(|r| r.metric == metric).collect();
    if selected.is_empty() {
        return Err(Error::InvalidConfig(format!("no rows for metric {metric:?}")));
    }
    let mut widths: Vec<usize> = selected.iter().map(|r| r.width).collect();
    widths.sort_unstable();
    widths.dedup();
    // Keyed by lambda bits so ordering is numeric for non-negative lambdas.
    let mut groups: BTreeMap<(u64, String), BTreeMap<usize, (f64, f64)>> = BTreeMap::new();
    for r in &selected {
        groups
            .entry((r.lambda.to_bits(), r.regularizer.clone()))
            .or_default()
            .insert(r.width, (r.mean, r.ci95));
    }
    let x: Vec<f64> = widths.iter().map(|&w| w as f64).collect();
    let mut spec = ChartSpec::new(format!("{metric} vs width"), XAxis::Width, x);
    spec.y_label = metric.to_string();
    for ((bits, reg), by_width) in &groups {
        if by_width.len() != widths.len() {
            return Err(Error::InvalidConfig(format!(
                "series lambda={} {reg} is missing widths",
                f64::from_bits(*bits)
            )));
        }
        let (y, ci): (Vec<f64>, Vec<f64>) = by_width.values().copied().unzip();
        let label = if reg == "none" {
            format!("lambda={}", f64::from_bits(*bits))
        } else {
            format!("lambda={} {reg}", f64::from_bits(*bits))
        };
        spec = spec.with_series(label, y, Some(ci));
    }
    if let Some(w) = detect_interpolation_width(rows) {
        spec.marks.push(w as f64);
    }
    Ok(spec)
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    step: usize,
    train_lp: f64,
    train_lm: f64,
    train_fnr_gap: Option<f64>,
    val_lp: f64,
}

/// Loss and train FNR gap against step from a trace CSV.
pub fn trace_chart(path: impl AsRef<Path>) -> Result<ChartSpec> {
    let rows: Vec<TraceRow> = read_rows(path.as_ref())?;
    if rows.is_empty() {
        return Err(Error::Empty("trace"));
    }
    let x = rows.iter().map(|r| r.step as f64).collect();
    let mut spec = ChartSpec::new("training dynamics", XAxis::Step, x)
        .with_series("train L_P", rows.iter().map(|r| r.train_lp).collect(), None)
        .with_series("train L_M", rows.iter().map(|r| r.train_lm).collect(), None)
        .with_series("val L_P", rows.iter().map(|r| r.val_lp).collect(), None);
    if rows.iter().all(|r| r.train_fnr_gap.is_some()) {
        spec = spec.with_series(
            "train FNR gap",
            rows.iter().filter_map(|r| r.train_fnr_gap).collect(),
            None,
        );
    }
    spec.y_label = "value".into();
    Ok(spec)
}

#[derive(Debug, Deserialize)]
struct ParetoRow {
    thr: f64,
    val_err: f64,
    test_err: f64,
    test_gap: f64,
}

/// Constrained error against the FNR-gap bound from a Pareto CSV.
pub fn pareto_chart(path: impl AsRef<Path>) -> Result<ChartSpec> {
    let rows: Vec<ParetoRow> = read_rows(path.as_ref())?;
    if rows.is_empty() {
        return Err(Error::Empty("pareto table"));
    }
    let mut spec = ChartSpec::new("fairness-constrained error", XAxis::Thr, rows.iter().map(|r| r.thr).collect())
        .with_series("val error", rows.iter().map(|r| r.val_err).collect(), None)
        .with_series("test error", rows.iter().map(|r| r.test_err).collect(), None)
        .with_series("test FNR gap", rows.iter().map(|r| r.test_gap).collect(), None);
    spec.y_label = "rate".into();
    Ok(spec)
}
