//! Post-hoc per-group threshold correction.
//!
//! Scores of group `a` are classified positive when `p >= tau_a`. The pair
//! `(tau_a0, tau_a1)` is chosen on validation scores by exhaustive search
//! over a uniform grid, minimising error subject to an FNR-gap bound, and is
//! then applied unchanged to test scores.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;

/// Slack on the FNR-gap constraint to absorb rounding in the rate division.
pub const CONSTRAINT_SLACK: f64 = 1e-12;

pub const DEFAULT_GRID_RESOLUTION: usize = 201;

/// Scores with labels and sensitive attributes for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub attrs: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>, attrs: Vec<u8>) -> Result<Self> {
        if labels.len() != scores.len() || attrs.len() != scores.len() {
            return Err(Error::DimensionMismatch {
                expected: scores.len(),
                actual: labels.len().min(attrs.len()),
                context: "labels/attrs vs scores",
            });
        }
        if scores.is_empty() {
            return Err(Error::Empty("scored set"));
        }
        if labels.iter().chain(&attrs).any(|&v| v > 1) {
            return Err(Error::InvalidSpec("labels and attrs must be 0 or 1".into()));
        }
        Ok(Self { scores, labels, attrs })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Hard predictions with a per-group threshold.
    pub fn predict(&self, pair: ThresholdPair) -> Vec<u8> {
        self.scores
            .iter()
            .zip(&self.attrs)
            .map(|(&p, &a)| u8::from(p >= pair.for_attr(a)))
            .collect()
    }

    /// Reads a CSV with header `score,y,a`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(BufReader::new(file));
        let parse_err = |row: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        let header = reader.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != ["score", "y", "a"] {
            return Err(parse_err(0, "header must be `score,y,a`".into()));
        }
        let (mut scores, mut labels, mut attrs) = (Vec::new(), Vec::new(), Vec::new());
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| parse_err(row, e.to_string()))?;
            let score: f64 = record[0]
                .parse()
                .map_err(|_| parse_err(row, format!("score: `{}` is not a number", &record[0])))?;
            if !(0.0..=1.0).contains(&score) {
                return Err(parse_err(row, format!("score {score} outside [0, 1]")));
            }
            let bit = |name: &str, s: &str| match s {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(parse_err(row, format!("{name}: `{other}` is not 0 or 1"))),
            };
            scores.push(score);
            labels.push(bit("y", &record[1])?);
            attrs.push(bit("a", &record[2])?);
        }
        Self::new(scores, labels, attrs)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "score,y,a").map_err(io)?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{}", self.scores[i], self.labels[i], self.attrs[i]).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub tau_a0: f64,
    pub tau_a1: f64,
}

impl ThresholdPair {
    pub fn new(tau_a0: f64, tau_a1: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&tau_a0) && (0.0..=1.0).contains(&tau_a1)) {
            return Err(Error::InvalidConfig("thresholds must lie in [0, 1]".into()));
        }
        Ok(Self { tau_a0, tau_a1 })
    }

    pub fn for_attr(&self, attr: u8) -> f64 {
        if attr == 0 {
            self.tau_a0
        } else {
            self.tau_a1
        }
    }
}

/// Thresholds chosen on validation data and their validation metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub thresholds: ThresholdPair,
    pub val_error: f64,
    pub val_fnr_gap: f64,
    pub constraint: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedResult {
    pub thresholds: ThresholdPair,
    pub val_error: f64,
    pub val_fnr_gap: f64,
    pub test_error: f64,
    pub test_fnr_gap: f64,
    pub constraint: f64,
    pub feasible: bool,
}

/// The `k`-th of `g` evenly spaced points on `[0, 1]`.
pub fn grid_point(k: usize, g: usize) -> f64 {
    k as f64 / (g - 1) as f64
}

/// Per-grid-point error and false-negative counts of one sensitive group.
struct GroupCurve {
    errors: Vec<usize>,
    misses: Vec<usize>,
    positives: usize,
}

fn group_curve(set: &ScoredSet, attr: u8, g: usize) -> GroupCurve {
    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for i in 0..set.len() {
        if set.attrs[i] == attr {
            if set.labels[i] == 1 {
                pos.push(set.scores[i]);
            } else {
                neg.push(set.scores[i]);
            }
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let mut errors = Vec::with_capacity(g);
    let mut misses = Vec::with_capacity(g);
    for k in 0..g {
        let tau = grid_point(k, g);
        // positives below tau are missed; negatives at or above tau are false alarms
        let missed = pos.partition_point(|&p| p < tau);
        let false_pos = neg.len() - neg.partition_point(|&p| p < tau);
        misses.push(missed);
        errors.push(missed + false_pos);
    }
    GroupCurve {
        errors,
        misses,
        positives: pos.len(),
    }
}

fn check_search_args(thr: f64, grid_resolution: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&thr) {
        return Err(Error::InvalidConfig(format!("constraint {thr} outside [0, 1]")));
    }
    if grid_resolution < 2 {
        return Err(Error::InvalidConfig("grid resolution must be >= 2".into()));
    }
    Ok(())
}

/// Minimises validation error over the `g x g` grid subject to
/// `FNR gap <= thr`. Ties break on lower error, then smaller gap, then the
/// lexicographically smallest `(tau_a0, tau_a1)`.
pub fn threshold_correct(val: &ScoredSet, thr: f64, grid_resolution: usize) -> Result<ThresholdSelection> {
    check_search_args(thr, grid_resolution)?;
    let g = grid_resolution;
    let c0 = group_curve(val, 0, g);
    let c1 = group_curve(val, 1, g);
    for (attr, c) in [(0u8, &c0), (1u8, &c1)] {
        if c.positives == 0 {
            return Err(Error::MissingSubgroup { attr });
        }
    }
    let (p0, p1) = (c0.positives as f64, c1.positives as f64);

    let mut best: Option<(usize, f64, usize, usize)> = None;
    for k0 in 0..g {
        let fnr0 = c0.misses[k0] as f64 / p0;
        for k1 in 0..g {
            let gap = (fnr0 - c1.misses[k1] as f64 / p1).abs();
            if gap > thr + CONSTRAINT_SLACK {
                continue;
            }
            let wrong = c0.errors[k0] + c1.errors[k1];
            let better = match best {
                None => true,
                Some((bw, bg, _, _)) => wrong < bw || (wrong == bw && gap < bg),
            };
            if better {
                best = Some((wrong, gap, k0, k1));
            }
        }
    }
    let (wrong, gap, k0, k1) = best.ok_or(Error::Infeasible { thr })?;
    Ok(ThresholdSelection {
        thresholds: ThresholdPair {
            tau_a0: grid_point(k0, g),
            tau_a1: grid_point(k1, g),
        },
        val_error: wrong as f64 / val.len() as f64,
        val_fnr_gap: gap,
        constraint: thr,
        feasible: true,
    })
}

/// Chooses thresholds on `val` and reports their effect on `test`.
pub fn constrained_test_error(
    val: &ScoredSet,
    test: &ScoredSet,
    thr: f64,
    grid_resolution: usize,
) -> Result<ConstrainedResult> {
    let sel = threshold_correct(val, thr, grid_resolution)?;
    let preds = test.predict(sel.thresholds);
    let report = metrics::evaluate(&preds, &test.labels, &test.attrs)?;
    Ok(ConstrainedResult {
        thresholds: sel.thresholds,
        val_error: sel.val_error,
        val_fnr_gap: sel.val_fnr_gap,
        test_error: report.error,
        test_fnr_gap: report.fnr_gap,
        constraint: thr,
        feasible: sel.feasible,
    })
}

/// One constrained result per constraint level in `thr_list` (ascending).
pub fn pareto_front(
    val: &ScoredSet,
    test: &ScoredSet,
    thr_list: &[f64],
    grid_resolution: usize,
) -> Result<Vec<ConstrainedResult>> {
    if thr_list.is_empty() {
        return Err(Error::Empty("constraint list"));
    }
    if thr_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("constraint list must be sorted ascending".into()));
    }
    thr_list
        .iter()
        .map(|&thr| constrained_test_error(val, test, thr, grid_resolution))
        .collect()
}

pub const PARETO_HEADER: &str = "thr,tau_a0,tau_a1,val_err,val_gap,test_err,test_gap,feasible";

pub fn write_pareto_csv<W: Write>(results: &[ConstrainedResult], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{PARETO_HEADER}")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.constraint,
            r.thresholds.tau_a0,
            r.thresholds.tau_a1,
            r.val_error,
            r.val_fnr_gap,
            r.test_error,
            r.test_fnr_gap,
            r.feasible
        )?;
    }
    Ok(())
}
