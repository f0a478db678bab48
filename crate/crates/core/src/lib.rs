//! Fairness-aware training on width-controlled random-feature classifiers.
//!
//! The crate trains a fixed random ReLU projection followed by a logistic
//! head, optionally penalised with MinDiff (an MMD penalty between the score
//! distributions of the two positive-label sensitive groups), and combines it
//! with flooding, weight decay, early stopping and batch-size control.
//! Trained scores can be post-processed with per-group thresholds chosen
//! under a false-negative-rate gap constraint.
//!
//! Module map:
//! - [`datagen`]: synthetic spurious-correlation data, splits, CSV I/O
//! - [`model`]: the random-feature classifier
//! - [`losses`]: BCE, MMD/MinDiff, flooding, weight decay and the total loss
//! - [`trainer`]: Adam, learning-rate schedule, batching, early stopping
//! - [`metrics`]: error, per-group FNR, interpolation threshold
//! - [`threshold`]: post-hoc per-group threshold correction
//! - [`sweep`]: grids over width, lambda, regularizer and seed
//! - [`report`]: SVG charts and the command-line interface

pub mod datagen;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod report;
pub mod sweep;
pub mod threshold;
pub mod trainer;

pub use datagen::{generate_spurious, load_csv, save_csv, split, GroupedDataset, SplitSpec, SpuriousSpec};
pub use error::{Error, Result};
pub use losses::{KernelFamily, KernelSpec, LossBreakdown};
pub use metrics::{evaluate, interpolation_threshold, EvalReport};
pub use model::{ModelOutputs, RandomFeatureModel};
pub use sweep::{aggregate, preset, run_sweep, CellSummary, Regularizer, SweepConfig, SweepResult};
pub use threshold::{constrained_test_error, pareto_front, threshold_correct, ConstrainedResult, ThresholdPair};
pub use trainer::{train, EarlyStopping, StopCriterion, TrainConfig, TrainTrace, TrainedModel};
