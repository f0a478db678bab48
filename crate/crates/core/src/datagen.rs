//! Synthetic spurious-correlation datasets, train/val/test splits and CSV I/O.
//!
//! The generator mimics a two-group "core vs. spurious" structure: one block
//! of coordinates carries the label signal, a second block carries the
//! sensitive attribute, and the attribute agrees with the label for a
//! configurable majority of rows. Minority rows (attribute disagreeing with
//! the label) are where a classifier leaning on the spurious block fails.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix with a binary label and binary sensitive attribute per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDataset {
    features: Array2<f64>,
    labels: Vec<u8>,
    attrs: Vec<u8>,
}

impl GroupedDataset {
    pub fn new(features: Array2<f64>, labels: Vec<u8>, attrs: Vec<u8>) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: labels.len(),
                context: "labels vs feature rows",
            });
        }
        if attrs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: attrs.len(),
                context: "attrs vs feature rows",
            });
        }
        if labels.iter().chain(attrs.iter()).any(|&v| v > 1) {
            return Err(Error::InvalidSpec("labels and attrs must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            attrs,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn attrs(&self) -> &[u8] {
        &self.attrs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Row indices belonging to group `(label, attr)`, in row order.
    pub fn group_indices(&self, label: u8, attr: u8) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] == label && self.attrs[i] == attr)
            .collect()
    }

    /// Counts indexed as `[y][a]`.
    pub fn group_counts(&self) -> [[usize; 2]; 2] {
        let mut counts = [[0usize; 2]; 2];
        for (&y, &a) in self.labels.iter().zip(&self.attrs) {
            counts[y as usize][a as usize] += 1;
        }
        counts
    }

    /// Fails unless both positive-label subgroups are non-empty.
    pub fn require_positive_subgroups(&self) -> Result<()> {
        let counts = self.group_counts();
        for attr in 0..2u8 {
            if counts[1][attr as usize] == 0 {
                return Err(Error::MissingSubgroup { attr });
            }
        }
        Ok(())
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> GroupedDataset {
        GroupedDataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            attrs: rows.iter().map(|&i| self.attrs[i]).collect(),
        }
    }
}

/// Parameters of the synthetic spurious-correlation generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousSpec {
    pub n_total: usize,
    pub d_core: usize,
    pub d_spur: usize,
    pub d_noise: usize,
    pub core_mean: f64,
    pub spur_mean: f64,
    pub noise_sigma: f64,
    /// Probability that the attribute equals the label.
    pub majority_fraction: f64,
    pub positive_fraction: f64,
    pub seed: u64,
    /// Exact per-group quotas instead of i.i.d. group draws.
    #[serde(default)]
    pub stratified: bool,
}

impl Default for SpuriousSpec {
    /// The standard 4000-row, 64-dimensional fixture used by the presets.
    fn default() -> Self {
        Self {
            n_total: 4000,
            d_core: 8,
            d_spur: 8,
            d_noise: 48,
            core_mean: 0.6,
            spur_mean: 1.0,
            noise_sigma: 1.0,
            majority_fraction: 0.95,
            positive_fraction: 0.25,
            seed: 0,
            stratified: true,
        }
    }
}

impl SpuriousSpec {
    pub fn dim(&self) -> usize {
        self.d_core + self.d_spur + self.d_noise
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        if self.dim() == 0 {
            return bad("d_core + d_spur + d_noise must be >= 1");
        }
        if self.n_total < 4 {
            return bad("n_total must be >= 4");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return bad("noise_sigma must be finite and > 0");
        }
        if !(self.core_mean.is_finite() && self.spur_mean.is_finite()) {
            return bad("core_mean and spur_mean must be finite");
        }
        if !(self.majority_fraction > 0.5 && self.majority_fraction <= 1.0) {
            return bad("majority_fraction must lie in (0.5, 1]");
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad("positive_fraction must lie in (0, 1)");
        }
        Ok(())
    }

    /// Probability of each `(y, a)` group, indexed `[y][a]`.
    fn group_probabilities(&self) -> [[f64; 2]; 2] {
        let p = self.positive_fraction;
        let q = self.majority_fraction;
        [[(1.0 - p) * q, (1.0 - p) * (1.0 - q)], [p * (1.0 - q), p * q]]
    }
}

/// Largest-remainder apportionment of `total` according to `weights`
/// (which need not be normalised). Ties go to the lower index.
pub(crate) fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = exact[i] - exact[i].floor();
        let fj = exact[j] - exact[j].floor();
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Draws a dataset from `spec`. Same spec, same bits.
pub fn generate_spurious(spec: &SpuriousSpec) -> Result<GroupedDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_total;

    let groups: Vec<(u8, u8)> = if spec.stratified {
        let probs = spec.group_probabilities();
        let cells = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)];
        let weights: Vec<f64> = cells.iter().map(|&(y, a)| probs[y as usize][a as usize]).collect();
        let mut quotas = largest_remainder(n, &weights);
        // Every group with positive mass gets at least one row.
        for i in 0..cells.len() {
            if weights[i] > 0.0 && quotas[i] == 0 {
                let donor = (0..cells.len()).max_by_key(|&j| (quotas[j], usize::MAX - j)).unwrap();
                quotas[donor] -= 1;
                quotas[i] += 1;
            }
        }
        let mut rows: Vec<(u8, u8)> = cells
            .iter()
            .zip(&quotas)
            .flat_map(|(&cell, &q)| std::iter::repeat_n(cell, q))
            .collect();
        rows.shuffle(&mut rng);
        rows
    } else {
        (0..n)
            .map(|_| {
                let y = u8::from(rng.random::<f64>() < spec.positive_fraction);
                let aligned = rng.random::<f64>() < spec.majority_fraction;
                let a = if aligned { y } else { 1 - y };
                (y, a)
            })
            .collect()
    };

    let d = spec.dim();
    let sigma = spec.noise_sigma;
    let mut features = Array2::<f64>::zeros((n, d));
    for (i, &(y, a)) in groups.iter().enumerate() {
        let ys = 2.0 * f64::from(y) - 1.0;
        let as_ = 2.0 * f64::from(a) - 1.0;
        let mut row = features.row_mut(i);
        for j in 0..d {
            let mean = if j < spec.d_core {
                spec.core_mean * ys
            } else if j < spec.d_core + spec.d_spur {
                spec.spur_mean * as_
            } else {
                0.0
            };
            let z: f64 = rng.sample(StandardNormal);
            row[j] = mean + sigma * z;
        }
    }
    let (labels, attrs) = groups.into_iter().unzip();
    GroupedDataset::new(features, labels, attrs)
}

/// Fractions for a three-way split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.3,
            val_fraction: 0.35,
            test_fraction: 0.35,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = self.fractions();
        if fr.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::InvalidSpec("split fractions must each lie in (0, 1)".into()));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec("split fractions must sum to 1".into()));
        }
        Ok(())
    }

    fn fractions(&self) -> [f64; 3] {
        [self.train_fraction, self.val_fraction, self.test_fraction]
    }
}

/// Splits `data` into disjoint (train, val, test) parts covering every row.
pub fn split(data: &GroupedDataset, spec: &SplitSpec) -> Result<(GroupedDataset, GroupedDataset, GroupedDataset)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fractions = spec.fractions();
    let mut parts: [Vec<usize>; 3] = Default::default();

    let strata: Vec<Vec<usize>> = if spec.stratified {
        let mut strata = Vec::new();
        for y in 0..2u8 {
            for a in 0..2u8 {
                let idx = data.group_indices(y, a);
                if idx.is_empty() {
                    continue;
                }
                if idx.len() < 3 {
                    return Err(Error::StratumTooSmall {
                        label: y,
                        attr: a,
                        size: idx.len(),
                    });
                }
                strata.push(idx);
            }
        }
        strata
    } else {
        vec![(0..data.len()).collect()]
    };

    for mut idx in strata {
        idx.shuffle(&mut rng);
        let mut counts = largest_remainder(idx.len(), &fractions);
        if spec.stratified {
            for s in 0..3 {
                if counts[s] == 0 {
                    let donor = (0..3).max_by_key(|&j| (counts[j], usize::MAX - j)).unwrap();
                    counts[donor] -= 1;
                    counts[s] += 1;
                }
            }
        }
        let mut start = 0;
        for (part, &c) in parts.iter_mut().zip(&counts) {
            part.extend_from_slice(&idx[start..start + c]);
            start += c;
        }
    }
    for part in parts.iter_mut() {
        part.sort_unstable();
    }
    Ok((data.select(&parts[0]), data.select(&parts[1]), data.select(&parts[2])))
}

/// Reads a dataset with header `f0,...,f{d-1},y,a`.
///
/// Row numbers in errors count data rows from 1 (the header is row 0).
pub fn load_csv(path: impl AsRef<Path>) -> Result<GroupedDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };

    let header = reader.headers()?.clone();
    let cols = header.len();
    if cols < 3 {
        return Err(parse_err(0, format!("expected at least 3 columns, found {cols}")));
    }
    let d = cols - 2;
    for (j, name) in header.iter().take(d).enumerate() {
        if name != format!("f{j}") {
            return Err(parse_err(0, format!("column {j} should be `f{j}`, found `{name}`")));
        }
    }
    if &header[d] != "y" || &header[d + 1] != "a" {
        return Err(parse_err(0, "last two columns must be `y,a`".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut attrs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() != cols {
            return Err(parse_err(row, format!("expected {cols} fields, found {}", record.len())));
        }
        for j in 0..d {
            let v: f64 = record[j]
                .parse()
                .map_err(|_| parse_err(row, format!("f{j}: `{}` is not a number", &record[j])))?;
            values.push(v);
        }
        let binary = |name: &str, s: &str| -> Result<u8> {
            match s {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(parse_err(row, format!("{name}: `{other}` is not 0 or 1"))),
            }
        };
        labels.push(binary("y", &record[d])?);
        attrs.push(binary("a", &record[d + 1])?);
    }
    let features = Array2::from_shape_vec((labels.len(), d), values)
        .map_err(|e| parse_err(0, e.to_string()))?;
    GroupedDataset::new(features, labels, attrs)
}

/// Writes `data` with header `f0,...,f{d-1},y,a`. Floats use the shortest
/// round-trip representation.
pub fn save_csv(data: &GroupedDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let d = data.dim();
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    header.push("y".into());
    header.push("a".into());
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(d + 2);
    for i in 0..data.len() {
        record.clear();
        record.extend(data.features.row(i).iter().map(|v| v.to_string()));
        record.push(data.labels[i].to_string());
        record.push(data.attrs[i].to_string());
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
