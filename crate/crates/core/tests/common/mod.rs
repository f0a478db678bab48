//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use fairlab::GroupedDataset;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive threshold search written directly from the definition:
/// classify every row for every grid pair and count.
///
/// Returns `(tau_a0, tau_a1, error, gap)` of the best feasible pair, or
/// `None` when nothing satisfies the constraint.
pub fn brute_threshold(
    scores: &[f64],
    labels: &[u8],
    attrs: &[u8],
    thr: f64,
    g: usize,
) -> Option<(f64, f64, f64, f64)> {
    let n = scores.len();
    let mut best: Option<(usize, f64, f64, f64)> = None;
    for k0 in 0..g {
        let t0 = k0 as f64 / (g - 1) as f64;
        for k1 in 0..g {
            let t1 = k1 as f64 / (g - 1) as f64;
            let mut wrong = 0usize;
            let mut pos = [0usize; 2];
            let mut miss = [0usize; 2];
            for i in 0..n {
                let tau = if attrs[i] == 0 { t0 } else { t1 };
                let pred = u8::from(scores[i] >= tau);
                if pred != labels[i] {
                    wrong += 1;
                }
                if labels[i] == 1 {
                    pos[attrs[i] as usize] += 1;
                    if pred == 0 {
                        miss[attrs[i] as usize] += 1;
                    }
                }
            }
            let gap = (miss[0] as f64 / pos[0] as f64 - miss[1] as f64 / pos[1] as f64).abs();
            if gap > thr + 1e-12 {
                continue;
            }
            let take = match best {
                None => true,
                // pairs are visited in lexicographic order, so only a strict
                // improvement replaces the incumbent
                Some((bw, bg, _, _)) => wrong < bw || (wrong == bw && gap < bg),
            };
            if take {
                best = Some((wrong, gap, t0, t1));
            }
        }
    }
    best.map(|(w, gap, t0, t1)| (t0, t1, w as f64 / n as f64, gap))
}

/// Direct double-sum MMD^2 with a Gaussian kernel.
pub fn mmd_oracle_gaussian(s: &[f64], t: &[f64], sigma: f64) -> f64 {
    let k = |a: f64, b: f64| (-(a - b) * (a - b) / (2.0 * sigma * sigma)).exp();
    mmd_oracle(s, t, k)
}

pub fn mmd_oracle(s: &[f64], t: &[f64], k: impl Fn(f64, f64) -> f64) -> f64 {
    let mean = |x: &[f64], y: &[f64]| {
        let mut acc = 0.0;
        for &a in x {
            for &b in y {
                acc += k(a, b);
            }
        }
        acc / (x.len() * y.len()) as f64
    };
    mean(s, s) + mean(t, t) - 2.0 * mean(s, t)
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// 20 points in 2-d, linearly separable by the sign of the first
/// coordinate, with both attributes present among positives.
pub fn separable20() -> GroupedDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut features = Array2::zeros((20, 2));
    let mut labels = Vec::new();
    let mut attrs = Vec::new();
    for i in 0..20 {
        let y = u8::from(i % 2 == 0);
        let sign = if y == 1 { 1.0 } else { -1.0 };
        features[[i, 0]] = sign * rng.random_range(0.5..2.0);
        features[[i, 1]] = rng.random_range(-1.0..1.0);
        labels.push(y);
        attrs.push(u8::from(i % 4 < 2));
    }
    GroupedDataset::new(features, labels, attrs).unwrap()
}

/// Random dataset of `n` rows in `d` dims with both positive subgroups present.
pub fn random_dataset(n: usize, d: usize, seed: u64) -> GroupedDataset {
    assert!(n >= 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = Array2::from_shape_simple_fn((n, d), || rng.random_range(-2.0..2.0));
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    let mut attrs: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
    labels[0] = 1;
    attrs[0] = 0;
    labels[1] = 1;
    attrs[1] = 1;
    GroupedDataset::new(features, labels, attrs).unwrap()
}
