//! Training objectives and their analytic gradients.
//!
//! All gradients are taken with respect to the logits first and pushed
//! through the linear head afterwards, so saturated probabilities never
//! produce `0 * inf`.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::datagen::GroupedDataset;
use crate::error::{Error, Result};
use crate::model::{sigmoid, sigmoid_derivative, RandomFeatureModel};

const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-(x - y)^2 / (2 sigma^2))`
    Gaussian,
    /// `exp(-|x - y| / sigma)`
    Laplace,
}

/// Kernel on the model's output space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            family: KernelFamily::Gaussian,
            bandwidth: 0.5,
        }
    }
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            bandwidth,
        }
    }

    pub fn laplace(bandwidth: f64) -> Self {
        Self {
            family: KernelFamily::Laplace,
            bandwidth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::InvalidConfig("kernel bandwidth must be finite and > 0".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        match self.family {
            KernelFamily::Gaussian => (-(d * d) / (2.0 * self.bandwidth * self.bandwidth)).exp(),
            KernelFamily::Laplace => (-d.abs() / self.bandwidth).exp(),
        }
    }

    /// `d k(x, y) / dx`. The Laplace kernel uses slope 0 at `x == y`.
    #[inline]
    pub fn dx(&self, x: f64, y: f64) -> f64 {
        let d = x - y;
        match self.family {
            KernelFamily::Gaussian => {
                let s2 = self.bandwidth * self.bandwidth;
                -d / s2 * (-(d * d) / (2.0 * s2)).exp()
            }
            KernelFamily::Laplace => {
                let sign = if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                -sign / self.bandwidth * (-d.abs() / self.bandwidth).exp()
            }
        }
    }
}

/// Weights and switches of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda: f64,
    pub flood_level: Option<f64>,
    pub weight_decay: f64,
    pub kernel: KernelSpec,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            flood_level: None,
            weight_decay: 0.0,
            kernel: KernelSpec::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig("lambda must be finite and >= 0".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("weight decay must be finite and >= 0".into()));
        }
        if let Some(b) = self.flood_level {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::InvalidConfig("flood level must be finite and >= 0".into()));
            }
        }
        self.kernel.validate()
    }
}

/// Parts of the total objective at one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Mean binary cross-entropy.
    pub primary: f64,
    /// Squared MMD between the positive-label subgroup outputs.
    pub mindiff: f64,
    /// Weight-decay penalty (already scaled by its strength).
    pub weight_decay: f64,
    pub total: f64,
    pub flood_level: Option<f64>,
    pub lambda: f64,
}

impl LossBreakdown {
    pub fn effective_primary(&self) -> f64 {
        match self.flood_level {
            Some(b) => flood_transform(self.primary, b),
            None => self.primary,
        }
    }

    /// `total` recomputed from the parts.
    pub fn recompute_total(&self) -> f64 {
        self.effective_primary() + self.lambda * self.mindiff + self.weight_decay
    }
}

/// Mean binary cross-entropy of probabilities, logs clamped at `1e-12`.
pub fn bce_loss(probabilities: ArrayView1<f64>, labels: &[u8]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::Empty("bce batch"));
    }
    if probabilities.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: probabilities.len(),
            actual: labels.len(),
            context: "labels vs probabilities",
        });
    }
    let sum: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / probabilities.len() as f64)
}

/// `ln(1 + e^z)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Per-example BCE written in logits: `softplus(z) - y z`.
#[inline]
pub(crate) fn bce_term(z: f64, y: u8) -> f64 {
    softplus(z) - f64::from(y) * z
}

/// Squared MMD (biased V-statistic) between two samples.
///
/// The three kernel means are accumulated by the same loop so that
/// `mmd_squared(s, s)` is exactly zero.
pub fn mmd_squared(s: ArrayView1<f64>, t: ArrayView1<f64>, kernel: &KernelSpec) -> Result<f64> {
    check_mmd_inputs(s.len(), t.len(), kernel)?;
    let value = kernel_mean(s, s, kernel) + kernel_mean(t, t, kernel) - 2.0 * kernel_mean(s, t, kernel);
    Ok(value.max(0.0))
}

fn check_mmd_inputs(ns: usize, nt: usize, kernel: &KernelSpec) -> Result<()> {
    if ns == 0 || nt == 0 {
        return Err(Error::Empty("mmd sample"));
    }
    kernel.validate()
}

fn kernel_mean(a: ArrayView1<f64>, b: ArrayView1<f64>, kernel: &KernelSpec) -> f64 {
    let mut sum = 0.0;
    for &x in a.iter() {
        for &y in b.iter() {
            sum += kernel.eval(x, y);
        }
    }
    sum / (a.len() * b.len()) as f64
}

/// Squared MMD together with its gradients with respect to each sample.
///
/// The gradients are those of the unclamped V-statistic, which is the
/// function the value equals whenever it is not rounded below zero.
pub fn mmd_squared_with_grad(
    s: ArrayView1<f64>,
    t: ArrayView1<f64>,
    kernel: &KernelSpec,
) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    let value = mmd_squared(s, t, kernel)?;
    let (ns, nt) = (s.len() as f64, t.len() as f64);
    let grad = |x: &ArrayView1<f64>, own: f64, other: &ArrayView1<f64>, n_other: f64| -> Array1<f64> {
        x.iter()
            .map(|&xa| {
                let within: f64 = x.iter().map(|&xj| kernel.dx(xa, xj)).sum();
                let across: f64 = other.iter().map(|&yj| kernel.dx(xa, yj)).sum();
                2.0 * within / (own * own) - 2.0 * across / (own * n_other)
            })
            .collect()
    };
    let ds = grad(&s, ns, &t, nt);
    let dt = grad(&t, nt, &s, ns);
    Ok((value, ds, dt))
}

/// Splits outputs of positive-label rows by attribute: `(a = 0, a = 1)`.
fn positive_subgroups(values: ArrayView1<f64>, labels: &[u8], attrs: &[u8]) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = values.len();
    if labels.len() != n || attrs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len().min(attrs.len()),
            context: "labels/attrs vs outputs",
        });
    }
    let mut g0 = Vec::new();
    let mut g1 = Vec::new();
    for i in 0..n {
        if labels[i] == 1 {
            if attrs[i] == 0 {
                g0.push(i);
            } else {
                g1.push(i);
            }
        }
    }
    if g0.is_empty() {
        return Err(Error::MissingSubgroup { attr: 0 });
    }
    if g1.is_empty() {
        return Err(Error::MissingSubgroup { attr: 1 });
    }
    Ok((g0, g1))
}

/// MinDiff penalty: squared MMD between outputs on `(y=1, a=0)` and `(y=1, a=1)`.
pub fn mindiff_loss(outputs: ArrayView1<f64>, labels: &[u8], attrs: &[u8], kernel: &KernelSpec) -> Result<f64> {
    let (g0, g1) = positive_subgroups(outputs, labels, attrs)?;
    let s: Array1<f64> = g0.iter().map(|&i| outputs[i]).collect();
    let t: Array1<f64> = g1.iter().map(|&i| outputs[i]).collect();
    mmd_squared(s.view(), t.view(), kernel)
}

/// MinDiff penalty on probabilities `sigmoid(logits)` and its gradient
/// with respect to the logits.
pub fn mindiff_from_logits(
    logits: ArrayView1<f64>,
    labels: &[u8],
    attrs: &[u8],
    kernel: &KernelSpec,
) -> Result<(f64, Array1<f64>)> {
    let (g0, g1) = positive_subgroups(logits, labels, attrs)?;
    let s: Array1<f64> = g0.iter().map(|&i| sigmoid(logits[i])).collect();
    let t: Array1<f64> = g1.iter().map(|&i| sigmoid(logits[i])).collect();
    let (value, ds, dt) = mmd_squared_with_grad(s.view(), t.view(), kernel)?;
    let mut dlogits = Array1::zeros(logits.len());
    for (k, &i) in g0.iter().enumerate() {
        dlogits[i] = ds[k] * sigmoid_derivative(logits[i]);
    }
    for (k, &i) in g1.iter().enumerate() {
        dlogits[i] = dt[k] * sigmoid_derivative(logits[i]);
    }
    Ok((value, dlogits))
}

/// Flooding: `|primary - b| + b`.
pub fn flood_transform(primary: f64, b: f64) -> f64 {
    (primary - b).abs() + b
}

/// Derivative of [`flood_transform`] in `primary`; `+1` at the kink.
pub fn flood_slope(primary: f64, b: f64) -> f64 {
    if primary >= b {
        1.0
    } else {
        -1.0
    }
}

/// `strength * (|w|^2 + bias^2) / 2`.
pub fn weight_decay_penalty(model: &RandomFeatureModel, strength: f64) -> f64 {
    let w = model.head_weights();
    strength * (w.dot(w) + model.head_bias().powi(2)) / 2.0
}

/// Gradient of [`weight_decay_penalty`]: `strength * (w, bias)`.
pub fn weight_decay_gradient(model: &RandomFeatureModel, strength: f64) -> (Array1<f64>, f64) {
    (model.head_weights() * strength, model.head_bias() * strength)
}

/// A set of rows of a precomputed hidden-feature matrix.
pub(crate) struct HiddenRows<'a> {
    pub hidden: ArrayView2<'a, f64>,
    pub rows: &'a [usize],
    pub labels: &'a [u8],
    pub attrs: &'a [u8],
}

impl HiddenRows<'_> {
    fn logits(&self, weights: ArrayView1<f64>, bias: f64) -> Array1<f64> {
        self.rows
            .iter()
            .map(|&r| self.hidden.row(r).dot(&weights) + bias)
            .collect()
    }

    fn row_labels(&self) -> Vec<u8> {
        self.rows.iter().map(|&r| self.labels[r]).collect()
    }

    fn row_attrs(&self) -> Vec<u8> {
        self.rows.iter().map(|&r| self.attrs[r]).collect()
    }

    /// Adds `sum_i dlogits_i * h_i` into `grad_w`; returns `sum_i dlogits_i`.
    fn accumulate(&self, dlogits: &Array1<f64>, grad_w: &mut Array1<f64>) -> f64 {
        for (&r, &g) in self.rows.iter().zip(dlogits.iter()) {
            if g != 0.0 {
                grad_w.scaled_add(g, &self.hidden.row(r));
            }
        }
        dlogits.sum()
    }
}

/// Mean BCE over the rows and its gradient with respect to the logits.
pub(crate) fn bce_from_logits(logits: &Array1<f64>, labels: &[u8]) -> Result<(f64, Array1<f64>)> {
    let n = logits.len();
    if n == 0 {
        return Err(Error::Empty("bce batch"));
    }
    let inv_n = 1.0 / n as f64;
    let loss = logits.iter().zip(labels).map(|(&z, &y)| bce_term(z, y)).sum::<f64>() * inv_n;
    let dlogits = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| (sigmoid(z) - f64::from(y)) * inv_n)
        .collect();
    Ok((loss, dlogits))
}

pub(crate) fn objective(
    weights: ArrayView1<f64>,
    bias: f64,
    primary: &HiddenRows<'_>,
    mindiff: Option<&HiddenRows<'_>>,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Array1<f64>, f64)> {
    let mut grad_w = Array1::zeros(weights.len());
    let mut grad_b = 0.0;

    let logits = primary.logits(weights, bias);
    let (lp, mut dlogits) = bce_from_logits(&logits, &primary.row_labels())?;
    if let Some(b) = cfg.flood_level {
        let slope = flood_slope(lp, b);
        if slope != 1.0 {
            dlogits.mapv_inplace(|g| g * slope);
        }
    }
    grad_b += primary.accumulate(&dlogits, &mut grad_w);

    let mut lm = 0.0;
    if cfg.lambda > 0.0 {
        let batch = mindiff.ok_or(Error::MissingSubgroup { attr: 0 })?;
        let logits = batch.logits(weights, bias);
        let (value, mut dlogits) =
            mindiff_from_logits(logits.view(), &batch.row_labels(), &batch.row_attrs(), &cfg.kernel)?;
        lm = value;
        dlogits.mapv_inplace(|g| g * cfg.lambda);
        grad_b += batch.accumulate(&dlogits, &mut grad_w);
    }

    let mut wd = 0.0;
    if cfg.weight_decay > 0.0 {
        wd = cfg.weight_decay * (weights.dot(&weights) + bias * bias) / 2.0;
        grad_w.scaled_add(cfg.weight_decay, &weights);
        grad_b += cfg.weight_decay * bias;
    }

    let mut breakdown = LossBreakdown {
        primary: lp,
        mindiff: lm,
        weight_decay: wd,
        total: 0.0,
        flood_level: cfg.flood_level,
        lambda: cfg.lambda,
    };
    breakdown.total = breakdown.recompute_total();
    Ok((breakdown, grad_w, grad_b))
}

/// Total objective `flood(L_P) + lambda * L_M + weight decay` and its exact
/// gradient with respect to the head `(w, bias)`.
///
/// `L_P` is taken over `primary_batch` and `L_M` over the positive-label
/// rows of `mindiff_batch`, which may be empty when `lambda == 0`.
pub fn total_loss_and_gradient(
    model: &RandomFeatureModel,
    primary_batch: &GroupedDataset,
    mindiff_batch: &GroupedDataset,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Array1<f64>, f64)> {
    cfg.validate()?;
    let primary_hidden = model.hidden(primary_batch.features().view())?;
    let primary_rows: Vec<usize> = (0..primary_batch.len()).collect();
    let primary = HiddenRows {
        hidden: primary_hidden.view(),
        rows: &primary_rows,
        labels: primary_batch.labels(),
        attrs: primary_batch.attrs(),
    };
    let mindiff_hidden;
    let mindiff_rows: Vec<usize>;
    let mindiff = if cfg.lambda > 0.0 {
        mindiff_hidden = model.hidden(mindiff_batch.features().view())?;
        mindiff_rows = (0..mindiff_batch.len()).collect();
        Some(HiddenRows {
            hidden: mindiff_hidden.view(),
            rows: &mindiff_rows,
            labels: mindiff_batch.labels(),
            attrs: mindiff_batch.attrs(),
        })
    } else {
        None
    };
    objective(
        model.head_weights().view(),
        model.head_bias(),
        &primary,
        mindiff.as_ref(),
        cfg,
    )
}
