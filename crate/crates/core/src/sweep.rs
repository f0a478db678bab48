//! Grids over width, lambda, regularizer and replicate seed.
//!
//! Every run gets a freshly initialised model. Model-init and batch-sampling
//! seeds are derived from `(master_seed, width, replicate seed)` only, so
//! runs that differ just in lambda or regularizer share their projection
//! and primary batch sequence and can be compared pairwise.

use std::env;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::datagen::{self, GroupedDataset, SplitSpec, SpuriousSpec};
use crate::error::{Error, Result};
use crate::metrics;
use crate::model::RandomFeatureModel;
use crate::threshold::{self, ConstrainedResult, ScoredSet};
use crate::trainer::{self, mix_seed, EarlyStopping, StopCriterion, TrainConfig, TrainTrace};

/// Extra regularisation applied on top of the base training config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    None,
    WeightDecay { strength: f64 },
    EarlyStopping { criterion: StopCriterion, patience: usize },
    Flooding { level: f64 },
    BatchSize { size: usize },
}

impl Regularizer {
    pub fn label(&self) -> String {
        match self {
            Regularizer::None => "none".into(),
            Regularizer::WeightDecay { strength } => format!("wd={strength}"),
            Regularizer::EarlyStopping { criterion, .. } => match criterion {
                StopCriterion::PrimaryValLoss => "es(lp)".into(),
                StopCriterion::TotalValLoss => "es(lt)".into(),
            },
            Regularizer::Flooding { level } => format!("fl={level}"),
            Regularizer::BatchSize { size } => format!("bs={size}"),
        }
    }

    pub fn apply(&self, cfg: &mut TrainConfig) {
        match *self {
            Regularizer::None => {}
            Regularizer::WeightDecay { strength } => cfg.weight_decay = strength,
            Regularizer::EarlyStopping { criterion, patience } => {
                cfg.early_stopping = Some(EarlyStopping { criterion, patience })
            }
            Regularizer::Flooding { level } => cfg.flood_level = Some(level),
            Regularizer::BatchSize { size } => cfg.batch_size = size,
        }
    }
}

/// Where the train/val/test splits come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic { spec: SpuriousSpec, split: SplitSpec },
    Csv { train: PathBuf, val: PathBuf, test: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            spec: SpuriousSpec::default(),
            split: SplitSpec::default(),
        }
    }
}

/// Train, validation and test splits.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: GroupedDataset,
    pub val: GroupedDataset,
    pub test: GroupedDataset,
}

impl DataSource {
    pub fn load(&self) -> Result<Splits> {
        match self {
            DataSource::Synthetic { spec, split } => {
                let data = datagen::generate_spurious(spec)?;
                let (train, val, test) = datagen::split(&data, split)?;
                Ok(Splits { train, val, test })
            }
            DataSource::Csv { train, val, test } => Ok(Splits {
                train: datagen::load_csv(train)?,
                val: datagen::load_csv(val)?,
                test: datagen::load_csv(test)?,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub widths: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub regularizers: Vec<Regularizer>,
    pub seeds: Vec<u64>,
    pub base: TrainConfig,
    /// FNR-gap bounds for the fairness-constrained evaluation.
    pub thr_values: Vec<f64>,
    pub grid_resolution: usize,
    pub master_seed: u64,
    pub data: DataSource,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            widths: vec![16, 64, 256, 1024],
            lambdas: vec![0.0, 0.5, 1.0, 1.5],
            regularizers: vec![Regularizer::None],
            seeds: (0..10).collect(),
            base: desk_train_config(),
            thr_values: vec![0.1],
            grid_resolution: threshold::DEFAULT_GRID_RESOLUTION,
            master_seed: 0,
            data: DataSource::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.widths.is_empty() || self.lambdas.is_empty() || self.regularizers.is_empty() || self.seeds.is_empty() {
            return bad("widths, lambdas, regularizers and seeds must all be non-empty");
        }
        if self.widths.windows(2).any(|w| w[1] <= w[0]) || self.widths[0] == 0 {
            return bad("widths must be positive and strictly increasing");
        }
        if self.thr_values.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("thr values must lie in [0, 1]");
        }
        if self.grid_resolution < 2 {
            return bad("grid_resolution must be >= 2");
        }
        self.base.validate()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Outcome of one successful run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub train_err: f64,
    pub train_fnr_gap: f64,
    pub train_lp: f64,
    pub val_err: f64,
    pub test_err: f64,
    pub test_fnr_gap: f64,
    /// One entry per `thr_values` element, in order.
    pub constrained: Vec<ConstrainedResult>,
    pub stopped_early_at: Option<usize>,
    pub trace: TrainTrace,
}

impl RunMetrics {
    /// Named scalar metrics in a fixed order.
    pub fn named(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("train_err".to_string(), self.train_err),
            ("train_fnr_gap".to_string(), self.train_fnr_gap),
            ("train_lp".to_string(), self.train_lp),
            ("val_err".to_string(), self.val_err),
            ("test_err".to_string(), self.test_err),
            ("test_fnr_gap".to_string(), self.test_fnr_gap),
        ];
        for c in &self.constrained {
            out.push((format!("constrained_test_err@{}", c.constraint), c.test_error));
            out.push((format!("constrained_test_gap@{}", c.constraint), c.test_fnr_gap));
            out.push((format!("constrained_val_err@{}", c.constraint), c.val_error));
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.named().into_iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub width: usize,
    pub lambda: f64,
    pub regularizer: Regularizer,
    pub seed: u64,
    pub outcome: std::result::Result<RunMetrics, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    pub ci95: f64,
}

/// Aggregate of one `(width, lambda, regularizer)` cell over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub width: usize,
    pub lambda: f64,
    pub regularizer: Regularizer,
    pub metrics: Vec<MetricSummary>,
    pub n_runs: usize,
    /// Reasons of runs excluded from the aggregate.
    pub failures: Vec<String>,
}

impl CellSummary {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellSummary>,
    pub runs: Vec<RunRecord>,
}

pub const RESULTS_HEADER: &str = "width,lambda,regularizer,metric,mean,ci95,n_runs";

impl SweepResult {
    pub fn cell(&self, width: usize, lambda: f64, regularizer: &Regularizer) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.width == width && c.lambda == lambda && &c.regularizer == regularizer)
    }

    /// Successful runs of one cell, in seed-list order.
    pub fn runs_of(&self, width: usize, lambda: f64, regularizer: &Regularizer) -> Vec<(u64, &RunMetrics)> {
        self.runs
            .iter()
            .filter(|r| r.width == width && r.lambda == lambda && &r.regularizer == regularizer)
            .filter_map(|r| r.outcome.as_ref().ok().map(|m| (r.seed, m)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{RESULTS_HEADER}")?;
        for c in &self.cells {
            for m in &c.metrics {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    c.width,
                    c.lambda,
                    c.regularizer.label(),
                    m.name,
                    m.mean,
                    m.ci95,
                    c.n_runs
                )?;
            }
        }
        Ok(())
    }

    /// Long-format per-run values: `width,lambda,regularizer,seed,metric,value`.
    pub fn write_runs_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "width,lambda,regularizer,seed,metric,value")?;
        for r in &self.runs {
            if let Ok(m) = &r.outcome {
                for (name, value) in m.named() {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        r.width,
                        r.lambda,
                        r.regularizer.label(),
                        r.seed,
                        name,
                        value
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Sample mean and Student-t 95% half-width. Values are summed in sorted
/// order so the result does not depend on input order.
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("aggregate input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Ok((mean, 0.0));
    }
    let mut devs: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    devs.sort_by(f64::total_cmp);
    let var = devs.iter().sum::<f64>() / (n - 1) as f64;
    let half = t_quantile(0.975, n - 1) * var.sqrt() / (n as f64).sqrt();
    Ok((mean, half))
}

/// Quantile of Student's t distribution with `df` degrees of freedom.
pub fn t_quantile(p: f64, df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1 is a valid t distribution")
        .inverse_cdf(p)
}

/// One-sided paired t-test of `mean(a - b) < 0`; returns the p-value.
///
/// Identical differences give p = 0 if they are negative and 1 otherwise.
pub fn paired_t_test_less(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
            context: "paired samples",
        });
    }
    if a.len() < 2 {
        return Err(Error::Empty("paired test needs at least two pairs"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean < 0.0 { 0.0 } else { 1.0 });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("valid t distribution");
    Ok(dist.cdf(t))
}

/// Fully specified single run of a sweep.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub width: usize,
    pub lambda: f64,
    pub regularizer: Regularizer,
    pub seed: u64,
    pub model_seed: u64,
    pub train: TrainConfig,
}

impl SweepConfig {
    /// All runs in canonical order: width, lambda, regularizer, seed.
    pub fn run_specs(&self) -> Vec<RunSpec> {
        let mut specs = Vec::new();
        for &width in &self.widths {
            for &lambda in &self.lambdas {
                for reg in &self.regularizers {
                    for &seed in &self.seeds {
                        let replicate = mix_seed(mix_seed(self.master_seed, width as u64), seed);
                        let mut train = self.base.clone();
                        train.lambda = lambda;
                        train.seed = mix_seed(replicate, 1);
                        reg.apply(&mut train);
                        specs.push(RunSpec {
                            width,
                            lambda,
                            regularizer: *reg,
                            seed,
                            model_seed: mix_seed(replicate, 0),
                            train,
                        });
                    }
                }
            }
        }
        specs
    }
}

/// Trains and evaluates one run.
pub fn execute_run(spec: &RunSpec, splits: &Splits, thr_values: &[f64], grid: usize) -> Result<RunMetrics> {
    let model = RandomFeatureModel::new(spec.width, splits.train.dim(), spec.model_seed)?;
    let trained = trainer::train(model, &splits.train, &splits.val, &spec.train)?;
    let scored = |data: &GroupedDataset| -> Result<ScoredSet> {
        let scores = trained.scores(data)?;
        ScoredSet::new(scores.to_vec(), data.labels().to_vec(), data.attrs().to_vec())
    };
    let train_s = scored(&splits.train)?;
    let val_s = scored(&splits.val)?;
    let test_s = scored(&splits.test)?;
    let at_half = |s: &ScoredSet| metrics::evaluate(&model_predictions(s), &s.labels, &s.attrs);
    let tr = at_half(&train_s)?;
    let va = at_half(&val_s)?;
    let te = at_half(&test_s)?;
    let train_lp = crate::losses::bce_loss(ndarray::ArrayView1::from(&train_s.scores), &train_s.labels)?;
    let constrained = thr_values
        .iter()
        .map(|&thr| threshold::constrained_test_error(&val_s, &test_s, thr, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunMetrics {
        train_err: tr.error,
        train_fnr_gap: tr.fnr_gap,
        train_lp,
        val_err: va.error,
        test_err: te.error,
        test_fnr_gap: te.fnr_gap,
        constrained,
        stopped_early_at: trained.stopped_early_at,
        trace: trained.trace,
    })
}

fn model_predictions(s: &ScoredSet) -> Vec<u8> {
    s.scores.iter().map(|&p| u8::from(p >= 0.5)).collect()
}

fn thread_cap() -> Option<usize> {
    env::var("FAIRLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs every cell and seed of `config` and aggregates per cell.
///
/// Failed runs are recorded with their reason and excluded from the
/// aggregate; the sweep fails only when every run of some cell failed.
/// Parallelism is capped by `FAIRLAB_THREADS` when set.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let splits = config.data.load()?;
    let specs = config.run_specs();
    let work = || -> Vec<RunRecord> {
        specs
            .par_iter()
            .map(|spec| RunRecord {
                width: spec.width,
                lambda: spec.lambda,
                regularizer: spec.regularizer,
                seed: spec.seed,
                outcome: execute_run(spec, &splits, &config.thr_values, config.grid_resolution)
                    .map_err(|e| e.to_string()),
            })
            .collect()
    };
    let runs = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let per_cell = config.seeds.len();
    let mut cells = Vec::with_capacity(runs.len() / per_cell);
    for chunk in runs.chunks(per_cell) {
        let first = &chunk[0];
        let ok: Vec<&RunMetrics> = chunk.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let failures: Vec<String> = chunk
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| format!("seed {}: {e}", r.seed)))
            .collect();
        let label = format!("width={} lambda={} {}", first.width, first.lambda, first.regularizer.label());
        if ok.is_empty() {
            return Err(Error::CellFailed(format!("{label}: {}", failures.join("; "))));
        }
        let names: Vec<String> = ok[0].named().into_iter().map(|(n, _)| n).collect();
        let metrics = names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let values: Vec<f64> = ok.iter().map(|m| m.named()[k].1).collect();
                let (mean, ci95) = aggregate(&values)?;
                Ok(MetricSummary {
                    name: name.clone(),
                    mean,
                    ci95,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(CellSummary {
            width: first.width,
            lambda: first.lambda,
            regularizer: first.regularizer,
            metrics,
            n_runs: ok.len(),
            failures,
        });
    }
    Ok(SweepResult { cells, runs })
}

pub const PRESET_NAMES: [&str; 6] = [
    "double_descent",
    "mindiff_vs_width",
    "dynamics_trace",
    "constrained_error",
    "batch_sizing",
    "regularizer_compare",
];

/// Desk-scale counterpart of the 30k-step Adam schedule: same initial rate
/// and ten-fold decays at thirds of training.
pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        total_steps: 3_000,
        batch_size: 128,
        mindiff_batch_size: 16,
        lr_initial: 0.01,
        lr_decay_factor: 10.0,
        lr_decay_every: 1_000,
        eval_every: 50,
        ..TrainConfig::default()
    }
}

/// Widths of the standard fixture sweep, log-spaced by factors of two.
pub const FIXTURE_WIDTHS: [usize; 9] = [16, 32, 64, 128, 256, 512, 1024, 2048, 4096];

/// Named experiment grids on the standard synthetic fixture.
pub fn preset(name: &str) -> Result<SweepConfig> {
    let base = SweepConfig {
        widths: FIXTURE_WIDTHS.to_vec(),
        ..SweepConfig::default()
    };
    let es = Regularizer::EarlyStopping {
        criterion: StopCriterion::PrimaryValLoss,
        patience: 10,
    };
    let cfg = match name {
        "double_descent" => SweepConfig {
            lambdas: vec![0.0],
            ..base
        },
        "mindiff_vs_width" => base,
        "dynamics_trace" => SweepConfig {
            widths: vec![64, 1024],
            lambdas: vec![1.5],
            base: TrainConfig {
                eval_every: 25,
                ..base.base.clone()
            },
            ..base
        },
        "constrained_error" => SweepConfig {
            thr_values: vec![0.02, 0.05, 0.1, 0.2],
            ..base
        },
        "batch_sizing" => SweepConfig {
            lambdas: vec![1.5],
            regularizers: vec![
                Regularizer::BatchSize { size: 8 },
                Regularizer::BatchSize { size: 32 },
                Regularizer::BatchSize { size: 128 },
            ],
            ..base
        },
        "regularizer_compare" => SweepConfig {
            lambdas: vec![0.5, 1.5],
            regularizers: vec![
                Regularizer::None,
                Regularizer::WeightDecay { strength: 0.001 },
                Regularizer::WeightDecay { strength: 0.1 },
                Regularizer::WeightDecay { strength: 10.0 },
                es,
                Regularizer::EarlyStopping {
                    criterion: StopCriterion::TotalValLoss,
                    patience: 10,
                },
                Regularizer::Flooding { level: 0.05 },
                Regularizer::Flooding { level: 0.1 },
            ],
            ..base
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}
