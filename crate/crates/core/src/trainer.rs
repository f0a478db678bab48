//! Minibatch Adam training of the logistic head with optional MinDiff,
//! flooding, weight decay and early stopping.
//!
//! The projection is fixed, so hidden features of the training and
//! validation sets are computed once per run and every step only touches
//! the head.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::GroupedDataset;
use crate::error::{Error, Result};
use crate::losses::{self, HiddenRows, KernelSpec, LossConfig};
use crate::metrics;
use crate::model::{self, RandomFeatureModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    PrimaryValLoss,
    TotalValLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub criterion: StopCriterion,
    /// Consecutive evaluations without improvement before stopping.
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub batch_size: usize,
    /// Rows drawn from each positive-label subgroup per step.
    pub mindiff_batch_size: usize,
    pub lambda: f64,
    pub lr_initial: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub weight_decay: f64,
    pub flood_level: Option<f64>,
    pub early_stopping: Option<EarlyStopping>,
    pub eval_every: usize,
    pub kernel: KernelSpec,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 30_000,
            batch_size: 128,
            mindiff_batch_size: 16,
            lambda: 0.0,
            lr_initial: 0.01,
            lr_decay_factor: 10.0,
            lr_decay_every: 10_000,
            weight_decay: 0.0,
            flood_level: None,
            early_stopping: None,
            eval_every: 250,
            kernel: KernelSpec::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            lambda: self.lambda,
            flood_level: self.flood_level,
            weight_decay: self.weight_decay,
            kernel: self.kernel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.total_steps == 0 {
            return bad("total_steps must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.lambda > 0.0 && self.mindiff_batch_size == 0 {
            return bad("mindiff_batch_size must be >= 1 when lambda > 0");
        }
        if !(self.lr_initial.is_finite() && self.lr_initial > 0.0) {
            return bad("lr_initial must be finite and > 0");
        }
        if !(self.lr_decay_factor.is_finite() && self.lr_decay_factor > 1.0) {
            return bad("lr_decay_factor must be > 1");
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be >= 1");
        }
        if self.eval_every == 0 || self.eval_every > self.total_steps {
            return bad("eval_every must lie in [1, total_steps]");
        }
        if let Some(es) = self.early_stopping {
            if es.patience == 0 {
                return bad("early stopping patience must be >= 1");
            }
        }
        self.loss_config().validate()
    }
}

/// `lr_initial / decay_factor^floor(step / decay_every)`.
pub fn lr_at(step: usize, cfg: &TrainConfig) -> f64 {
    let decays = (step / cfg.lr_decay_every) as i32;
    cfg.lr_initial / cfg.lr_decay_factor.powi(decays)
}

/// Moment estimates of Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    let n = params.len();
    for (len, context) in [
        (grads.len(), "adam gradients"),
        (state.first_moment.len(), "adam first moment"),
        (state.second_moment.len(), "adam second moment"),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
                context,
            });
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for i in 0..n {
        let g = grads[i];
        let m = b1 * state.first_moment[i] + (1.0 - b1) * g;
        let v = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        params[i] -= lr * (m / c1) / ((v / c2).sqrt() + state.epsilon);
    }
    Ok(())
}

/// Row indices of one training step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchIndices {
    pub primary: Vec<usize>,
    /// `mindiff_batch_size` rows of `(y=1, a=0)` followed by as many of
    /// `(y=1, a=1)`; empty when lambda is zero.
    pub mindiff: Vec<usize>,
}

/// Draws primary and MinDiff batches from independent seeded streams, so
/// the primary batch sequence does not depend on lambda.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    batch_size: usize,
    mindiff_batch_size: usize,
    positives: Option<[Vec<usize>; 2]>,
    primary_rng: ChaCha8Rng,
    mindiff_rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(train: &GroupedDataset, cfg: &TrainConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let positives = if cfg.lambda > 0.0 {
            train.require_positive_subgroups()?;
            Some([train.group_indices(1, 0), train.group_indices(1, 1)])
        } else {
            None
        };
        Ok(Self {
            n: train.len(),
            batch_size: cfg.batch_size,
            mindiff_batch_size: cfg.mindiff_batch_size,
            positives,
            primary_rng: ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1)),
            mindiff_rng: ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 2)),
        })
    }

    pub fn sample(&mut self) -> BatchIndices {
        let primary = if self.batch_size <= self.n {
            index::sample(&mut self.primary_rng, self.n, self.batch_size).into_vec()
        } else {
            (0..self.batch_size)
                .map(|_| self.primary_rng.random_range(0..self.n))
                .collect()
        };
        let mut mindiff = Vec::new();
        if let Some(groups) = &self.positives {
            mindiff.reserve(2 * self.mindiff_batch_size);
            for group in groups {
                for _ in 0..self.mindiff_batch_size {
                    mindiff.push(group[self.mindiff_rng.random_range(0..group.len())]);
                }
            }
        }
        BatchIndices { primary, mindiff }
    }
}

/// SplitMix64 finaliser over `seed ^ stream`; used to derive independent
/// seeds from one master seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Metrics recorded at one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// Number of Adam updates applied so far.
    pub step: usize,
    pub lr: f64,
    pub train_lp: f64,
    pub train_lm: f64,
    /// `train_lp + lambda * train_lm`
    pub train_lt: f64,
    pub train_err: f64,
    /// `None` when a positive subgroup is absent.
    pub train_fnr_gap: Option<f64>,
    /// Norm of the head gradient of the (unweighted) MinDiff term on the
    /// training probe.
    pub train_lm_grad_norm: f64,
    pub val_lp: f64,
    pub val_lt: f64,
    pub val_err: f64,
    pub val_fnr_gap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub points: Vec<TracePoint>,
}

pub const TRACE_HEADER: &str =
    "step,lr,train_lp,train_lm,train_lt,train_err,train_fnr_gap,val_lp,val_lt,val_err,val_fnr_gap";

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(out, "{TRACE_HEADER}")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.step,
                p.lr,
                p.train_lp,
                p.train_lm,
                p.train_lt,
                p.train_err,
                opt(p.train_fnr_gap),
                p.val_lp,
                p.val_lt,
                p.val_err,
                opt(p.val_fnr_gap),
            )?;
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

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: RandomFeatureModel,
    pub trace: TrainTrace,
    pub stopped_early_at: Option<usize>,
    /// Step of the returned checkpoint when early stopping is configured.
    pub best_step: Option<usize>,
    pub config: TrainConfig,
}

/// Losses and rates of the head on a fully materialised hidden matrix.
struct SetEval {
    lp: f64,
    lm: Option<f64>,
    lm_grad_norm: f64,
    err: f64,
    fnr_gap: Option<f64>,
}

fn eval_set(
    hidden: ArrayView2<f64>,
    data: &GroupedDataset,
    weights: ArrayView1<f64>,
    bias: f64,
    kernel: &KernelSpec,
    with_grad: bool,
) -> Result<SetEval> {
    let logits = hidden.dot(&weights) + bias;
    let labels = data.labels();
    let lp = logits.iter().zip(labels).map(|(&z, &y)| losses::bce_term(z, y)).sum::<f64>() / logits.len() as f64;
    let preds: Vec<u8> = logits.iter().map(|&z| u8::from(model::probability(z) >= 0.5)).collect();
    let err = metrics::error_rate(&preds, labels)?;
    let fnr_gap = metrics::evaluate(&preds, labels, data.attrs()).ok().map(|r| r.fnr_gap);
    let (lm, lm_grad_norm) = match losses::mindiff_from_logits(logits.view(), labels, data.attrs(), kernel) {
        Ok((value, dlogits)) => {
            let norm = if with_grad {
                let (gw, gb) = model::logit_gradient(hidden, dlogits.view());
                (gw.dot(&gw) + gb * gb).sqrt()
            } else {
                0.0
            };
            (Some(value), norm)
        }
        Err(Error::MissingSubgroup { .. }) => (None, 0.0),
        Err(e) => return Err(e),
    };
    Ok(SetEval {
        lp,
        lm,
        lm_grad_norm,
        err,
        fnr_gap,
    })
}

fn check_dims(model: &RandomFeatureModel, data: &GroupedDataset, context: &'static str) -> Result<()> {
    if data.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            actual: data.dim(),
            context,
        });
    }
    if data.is_empty() {
        return Err(Error::Empty(context));
    }
    Ok(())
}

struct Evaluator<'a> {
    train_hidden: &'a Array2<f64>,
    val_hidden: &'a Array2<f64>,
    train: &'a GroupedDataset,
    val: &'a GroupedDataset,
    cfg: &'a TrainConfig,
}

impl Evaluator<'_> {
    fn point(&self, step: usize, params: &[f64]) -> Result<TracePoint> {
        let m = params.len() - 1;
        let weights = ArrayView1::from(&params[..m]);
        let bias = params[m];
        let lambda = self.cfg.lambda;
        let tr = eval_set(self.train_hidden.view(), self.train, weights, bias, &self.cfg.kernel, true)?;
        let va = eval_set(self.val_hidden.view(), self.val, weights, bias, &self.cfg.kernel, false)?;
        let train_lm = tr.lm.unwrap_or(0.0);
        let point = TracePoint {
            step,
            lr: lr_at(step.saturating_sub(1), self.cfg),
            train_lp: tr.lp,
            train_lm,
            train_lt: tr.lp + lambda * train_lm,
            train_err: tr.err,
            train_fnr_gap: tr.fnr_gap,
            train_lm_grad_norm: tr.lm_grad_norm,
            val_lp: va.lp,
            val_lt: va.lp + lambda * va.lm.unwrap_or(0.0),
            val_err: va.err,
            val_fnr_gap: va.fnr_gap,
        };
        let losses = [point.train_lp, point.train_lm, point.train_lt, point.val_lp, point.val_lt];
        if losses.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { step });
        }
        Ok(point)
    }
}

/// Trains the head of `model` on `train`, evaluating on `train` and `val`
/// every `eval_every` steps (and at steps 0 and `total_steps`).
///
/// With early stopping configured the returned model is the evaluated
/// checkpoint with the lowest criterion value; training halts once
/// `patience` consecutive evaluations fail to improve on it.
pub fn train(
    model: RandomFeatureModel,
    train: &GroupedDataset,
    val: &GroupedDataset,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    check_dims(&model, train, "training set")?;
    check_dims(&model, val, "validation set")?;
    let mut model = model;
    let loss_cfg = cfg.loss_config();
    let mut sampler = BatchSampler::new(train, cfg)?;

    let train_hidden = model.hidden(train.features().view())?;
    let val_hidden = model.hidden(val.features().view())?;
    let evaluator = Evaluator {
        train_hidden: &train_hidden,
        val_hidden: &val_hidden,
        train,
        val,
        cfg,
    };

    let width = model.width();
    let mut params = model.head_params();
    let mut grads = vec![0.0; width + 1];
    let mut adam = AdamState::new(width + 1);
    let mut trace = TrainTrace::default();

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut since_best = 0usize;
    let mut stopped_early_at = None;

    let mut record = |step: usize, params: &[f64], trace: &mut TrainTrace| -> Result<bool> {
        let point = evaluator.point(step, params)?;
        let mut stop = false;
        if let Some(es) = cfg.early_stopping {
            let value = match es.criterion {
                StopCriterion::PrimaryValLoss => point.val_lp,
                StopCriterion::TotalValLoss => point.val_lt,
            };
            match &best {
                Some((best_value, _, _)) if value >= *best_value => {
                    since_best += 1;
                    stop = since_best >= es.patience;
                }
                _ => {
                    best = Some((value, step, params.to_vec()));
                    since_best = 0;
                }
            }
        }
        trace.points.push(point);
        Ok(stop)
    };

    record(0, &params, &mut trace)?;
    for step in 0..cfg.total_steps {
        let batch = sampler.sample();
        let (weights, bias) = params.split_at(width);
        let primary = HiddenRows {
            hidden: train_hidden.view(),
            rows: &batch.primary,
            labels: train.labels(),
            attrs: train.attrs(),
        };
        let mindiff = HiddenRows {
            hidden: train_hidden.view(),
            rows: &batch.mindiff,
            labels: train.labels(),
            attrs: train.attrs(),
        };
        let mindiff = (!batch.mindiff.is_empty()).then_some(&mindiff);
        let (breakdown, grad_w, grad_b) =
            losses::objective(ArrayView1::from(weights), bias[0], &primary, mindiff, &loss_cfg)?;
        if !breakdown.total.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        grads[..width].copy_from_slice(grad_w.as_slice().expect("contiguous gradient"));
        grads[width] = grad_b;
        adam_step(&mut params, &grads, &mut adam, lr_at(step, cfg))?;

        let done = step + 1;
        if (done % cfg.eval_every == 0 || done == cfg.total_steps) && record(done, &params, &mut trace)? {
            stopped_early_at = Some(done);
            break;
        }
    }

    let best_step = match best {
        Some((_, step, best_params)) => {
            params = best_params;
            Some(step)
        }
        None => None,
    };
    model.set_head_params(&params)?;
    Ok(TrainedModel {
        model,
        trace,
        stopped_early_at,
        best_step,
        config: cfg.clone(),
    })
}

impl TrainedModel {
    pub fn scores(&self, data: &GroupedDataset) -> Result<Array1<f64>> {
        self.model.scores(data.features().view())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn adam_ignores_zero_gradient() {
        let mut params = vec![1.5, -2.0];
        let mut state = AdamState::new(2);
        adam_step(&mut params, &[0.0, 0.0], &mut state, 0.01).unwrap();
        assert_eq!(params, vec![1.5, -2.0]);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1);
        adam_step(&mut params, &[1.0], &mut state, 0.01).unwrap();
        // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
        assert!((params[0] + 0.01).abs() < 1e-6);
        assert!((params[0] + 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adam_two_steps_match_hand_roll() {
        let (lr, g) = (0.01, 0.5);
        let mut params = vec![0.3];
        let mut state = AdamState::new(1);
        adam_step(&mut params, &[g], &mut state, lr).unwrap();
        adam_step(&mut params, &[g], &mut state, lr).unwrap();

        let mut theta = 0.3f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            theta -= lr * mh / (vh.sqrt() + 1e-8);
        }
        assert!((params[0] - theta).abs() < 1e-12);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut state = AdamState::new(2);
        assert!(adam_step(&mut [0.0, 0.0], &[1.0], &mut state, 0.1).is_err());
    }

    #[test]
    fn learning_rate_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at(0, &cfg), 0.01);
        assert!((lr_at(10_000, &cfg) - 0.001).abs() < 1e-18);
        assert!((lr_at(29_999, &cfg) - 0.0001).abs() < 1e-18);
        let mut prev = f64::INFINITY;
        for step in (0..30_000).step_by(997) {
            let lr = lr_at(step, &cfg);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    fn tiny_data() -> GroupedDataset {
        let features = Array2::from_shape_fn((6, 2), |(i, j)| (i * i + j) as f64 / 10.0);
        GroupedDataset::new(features, vec![1, 1, 0, 0, 1, 0], vec![0, 1, 0, 1, 1, 1]).unwrap()
    }

    #[test]
    fn zero_lambda_never_draws_mindiff_rows() {
        let cfg = TrainConfig {
            batch_size: 4,
            ..TrainConfig::default()
        };
        let mut sampler = BatchSampler::new(&tiny_data(), &cfg).unwrap();
        for _ in 0..5 {
            let b = sampler.sample();
            assert!(b.mindiff.is_empty());
            let mut sorted = b.primary.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 4);
        }
    }

    #[test]
    fn singleton_subgroup_is_repeated() {
        let cfg = TrainConfig {
            lambda: 1.0,
            mindiff_batch_size: 8,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let mut sampler = BatchSampler::new(&tiny_data(), &cfg).unwrap();
        let b = sampler.sample();
        assert_eq!(b.mindiff.len(), 16);
        assert!(b.mindiff[..8].iter().all(|&i| i == 0));
    }

    #[test]
    fn sampling_is_seeded() {
        let cfg = TrainConfig {
            lambda: 0.5,
            batch_size: 3,
            seed: 42,
            ..TrainConfig::default()
        };
        let data = tiny_data();
        let mut a = BatchSampler::new(&data, &cfg).unwrap();
        let mut b = BatchSampler::new(&data, &cfg).unwrap();
        for _ in 0..10 {
            assert_eq!(a.sample(), b.sample());
        }
    }

    #[test]
    fn oversized_batch_samples_with_replacement() {
        let cfg = TrainConfig {
            batch_size: 20,
            ..TrainConfig::default()
        };
        let b = BatchSampler::new(&tiny_data(), &cfg).unwrap().sample();
        assert_eq!(b.primary.len(), 20);
        assert!(b.primary.iter().all(|&i| i < 6));
    }

    #[test]
    fn missing_subgroup_blocks_mindiff_sampling() {
        let features = Array2::zeros((3, 1));
        let data = GroupedDataset::new(features, vec![1, 0, 1], vec![1, 0, 1]).unwrap();
        let cfg = TrainConfig {
            lambda: 1.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            BatchSampler::new(&data, &cfg),
            Err(Error::MissingSubgroup { attr: 0 })
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = TrainConfig {
            total_steps: 10,
            eval_every: 5,
            ..TrainConfig::default()
        };
        for cfg in [
            TrainConfig { total_steps: 0, ..base.clone() },
            TrainConfig { batch_size: 0, ..base.clone() },
            TrainConfig { eval_every: 11, ..base.clone() },
            TrainConfig { lr_decay_factor: 1.0, ..base.clone() },
            TrainConfig { lambda: -1.0, ..base.clone() },
            TrainConfig { flood_level: Some(-0.1), ..base.clone() },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn single_step_run() {
        let data = tiny_data();
        let model = RandomFeatureModel::new(4, 2, 0).unwrap();
        let cfg = TrainConfig {
            total_steps: 1,
            eval_every: 1,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let out = train(model, &data, &data, &cfg).unwrap();
        assert_eq!(out.trace.points.iter().map(|p| p.step).collect::<Vec<_>>(), vec![0, 1]);
        assert_ne!(out.model.head_params(), vec![0.0; 5]);
    }

    #[test]
    fn trace_csv_header() {
        let mut buf = Vec::new();
        TrainTrace::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), TRACE_HEADER);
    }

    #[test]
    fn mix_seed_separates_streams() {
        assert_ne!(mix_seed(0, 1), mix_seed(0, 2));
        assert_ne!(mix_seed(1, 1), mix_seed(0, 1));
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
    }
}
