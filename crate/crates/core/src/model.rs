//! Random-feature classifier: `p = sigmoid(w . ReLU(U x) + bias)`.
//!
//! `U` is a fixed Gaussian projection drawn once from a seed; only the
//! logistic head `(w, bias)` is trainable. Width `m` is the number of random
//! features and is the model-size knob swept by the experiments.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest double strictly below one.
const PROB_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(z)` clamped into the open unit interval.
#[inline]
pub fn probability(z: f64) -> f64 {
    sigmoid(z).clamp(f64::MIN_POSITIVE, PROB_MAX)
}

/// `sigmoid'(z) = sigmoid(z) * sigmoid(-z)`, without cancellation.
#[inline]
pub fn sigmoid_derivative(z: f64) -> f64 {
    sigmoid(z) * sigmoid(-z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomFeatureModel {
    input_dim: usize,
    width: usize,
    seed: u64,
    projection: Array2<f64>,
    head_weights: Array1<f64>,
    head_bias: f64,
}

/// Result of a forward pass over a batch.
#[derive(Debug, Clone)]
pub struct ModelOutputs {
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
    /// ReLU features, batch x width.
    pub hidden: Array2<f64>,
}

fn gaussian_projection(width: usize, input_dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (input_dim as f64).sqrt();
    Array2::from_shape_simple_fn((width, input_dim), || {
        let z: f64 = rng.sample(StandardNormal);
        z * scale
    })
}

impl RandomFeatureModel {
    /// Projection entries are i.i.d. `Normal(0, 1/d)`; the head starts at zero.
    pub fn new(width: usize, input_dim: usize, seed: u64) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidConfig("model width must be >= 1".into()));
        }
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input dimension must be >= 1".into()));
        }
        Ok(Self {
            input_dim,
            width,
            seed,
            projection: gaussian_projection(width, input_dim, seed),
            head_weights: Array1::zeros(width),
            head_bias: 0.0,
        })
    }

    /// Builds a model from an explicit projection (rows = width). The stored
    /// seed is meaningless for such a model, so checkpoints of it cannot
    /// regenerate the projection.
    pub fn from_parts(projection: Array2<f64>, head_weights: Array1<f64>, head_bias: f64) -> Result<Self> {
        let (width, input_dim) = projection.dim();
        if width == 0 || input_dim == 0 {
            return Err(Error::InvalidConfig("projection must be non-empty".into()));
        }
        if head_weights.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: head_weights.len(),
                context: "head weights vs width",
            });
        }
        Ok(Self {
            input_dim,
            width,
            seed: 0,
            projection,
            head_weights,
            head_bias,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn projection(&self) -> &Array2<f64> {
        &self.projection
    }

    pub fn head_weights(&self) -> &Array1<f64> {
        &self.head_weights
    }

    pub fn head_bias(&self) -> f64 {
        self.head_bias
    }

    pub fn set_head(&mut self, weights: ArrayView1<f64>, bias: f64) -> Result<()> {
        if weights.len() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                actual: weights.len(),
                context: "head weights vs width",
            });
        }
        self.head_weights.assign(&weights);
        self.head_bias = bias;
        Ok(())
    }

    /// Head parameters packed as `[w_0, ..., w_{m-1}, bias]`.
    pub fn head_params(&self) -> Vec<f64> {
        let mut params = self.head_weights.to_vec();
        params.push(self.head_bias);
        params
    }

    pub fn set_head_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.width + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.width + 1,
                actual: params.len(),
                context: "packed head parameters",
            });
        }
        self.head_weights
            .as_slice_mut()
            .expect("head weights are contiguous")
            .copy_from_slice(&params[..self.width]);
        self.head_bias = params[self.width];
        Ok(())
    }

    fn check_features(&self, features: &ArrayView2<f64>) -> Result<()> {
        if features.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: features.ncols(),
                context: "feature columns vs model input dimension",
            });
        }
        Ok(())
    }

    /// `ReLU(X U^T)`, batch x width.
    pub fn hidden(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_features(&features)?;
        let mut hidden = features.dot(&self.projection.t());
        hidden.mapv_inplace(|v| v.max(0.0));
        Ok(hidden)
    }

    /// Logits of the head applied to precomputed hidden features.
    pub fn logits_from_hidden(&self, hidden: ArrayView2<f64>) -> Array1<f64> {
        hidden.dot(&self.head_weights) + self.head_bias
    }

    pub fn forward(&self, features: ArrayView2<f64>) -> Result<ModelOutputs> {
        let hidden = self.hidden(features)?;
        let logits = self.logits_from_hidden(hidden.view());
        let probabilities = logits.mapv(probability);
        Ok(ModelOutputs {
            logits,
            probabilities,
            hidden,
        })
    }

    pub fn scores(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.forward(features)?.probabilities)
    }

    /// `1` where `p >= tau`, else `0`.
    pub fn predict(&self, features: ArrayView2<f64>, tau: f64) -> Result<Vec<u8>> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidConfig(format!("threshold {tau} outside [0, 1]")));
        }
        Ok(threshold_scores(self.scores(features)?.view(), tau))
    }

    /// Gradient of a loss with respect to `(w, bias)` given `dL/dp` per example.
    pub fn head_gradient(&self, features: ArrayView2<f64>, upstream: ArrayView1<f64>) -> Result<(Array1<f64>, f64)> {
        let outputs = self.forward(features)?;
        head_gradient_from_outputs(&outputs, upstream)
    }
}

/// Applies the `p >= tau` rule elementwise.
pub fn threshold_scores(scores: ArrayView1<f64>, tau: f64) -> Vec<u8> {
    scores.iter().map(|&p| u8::from(p >= tau)).collect()
}

/// Chain rule through the sigmoid: `dL/dz_i = dL/dp_i * p_i (1 - p_i)`.
pub fn head_gradient_from_outputs(outputs: &ModelOutputs, upstream: ArrayView1<f64>) -> Result<(Array1<f64>, f64)> {
    let n = outputs.logits.len();
    if upstream.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: upstream.len(),
            context: "upstream gradient vs batch size",
        });
    }
    let dlogits: Array1<f64> = outputs
        .logits
        .iter()
        .zip(upstream.iter())
        .map(|(&z, &g)| g * sigmoid_derivative(z))
        .collect();
    Ok(logit_gradient(outputs.hidden.view(), dlogits.view()))
}

/// Gradient with respect to `(w, bias)` given `dL/dz` per example.
pub fn logit_gradient(hidden: ArrayView2<f64>, dlogits: ArrayView1<f64>) -> (Array1<f64>, f64) {
    (hidden.t().dot(&dlogits), dlogits.sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    input_dim: usize,
    width: usize,
    seed: u64,
    head_weights: Vec<f64>,
    head_bias: f64,
}

const CHECKPOINT_VERSION: u32 = 1;

impl RandomFeatureModel {
    /// JSON checkpoint. The projection is stored as its seed and regenerated
    /// on load.
    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            input_dim: self.input_dim,
            width: self.width,
            seed: self.seed,
            head_weights: self.head_weights.to_vec(),
            head_bias: self.head_bias,
        };
        Ok(serde_json::to_string_pretty(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint version {}",
                ck.format_version
            )));
        }
        let mut model = Self::new(ck.width, ck.input_dim, ck.seed)?;
        model.set_head(ArrayView1::from(&ck.head_weights), ck.head_bias)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
