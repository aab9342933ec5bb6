//! Dataset ingestion, the RBF feature map, splitting and mini-batch sampling.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::Dataset;

/// Maps labels in {−1, +1} to {0, 1}; anything else passes through.
fn remap_labels(labels: &mut [f64]) {
    if labels.iter().all(|&y| y == -1.0 || y == 1.0) && labels.contains(&-1.0) {
        for y in labels.iter_mut() {
            if *y == -1.0 {
                *y = 0.0;
            }
        }
    }
}

/// Reads `label idx:val idx:val ...` lines with 1-based, strictly
/// increasing indices. Absent indices are zero. The feature width is
/// `n_features` if given, otherwise the largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R, n_features: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("bad label {label_tok:?}"),
        })?;
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad index in {tok:?}"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad value in {tok:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: "indices are 1-based".into(),
                });
            }
            if idx <= last {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("index {idx} does not increase (previous {last})"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite value in {tok:?}"),
                });
            }
            last = idx;
            entries.push((idx, val));
        }
        max_index = max_index.max(last);
        labels.push(label);
        rows.push(entries);
    }
    let width = match n_features {
        Some(n) if n < max_index => {
            return Err(Error::Argument(format!(
                "feature index {max_index} exceeds declared width {n}"
            )))
        }
        Some(n) => n,
        None => max_index,
    };
    if rows.is_empty() {
        return Err(Error::Argument("no samples in LIBSVM input".into()));
    }
    let mut features = DMatrix::zeros(rows.len(), width);
    for (i, row) in rows.iter().enumerate() {
        for &(idx, val) in row {
            features[(i, idx - 1)] = val;
        }
    }
    remap_labels(&mut labels);
    Dataset::with_labels(features, &labels)
}

/// Writes a single-target dataset in LIBSVM format, skipping zero features.
pub fn write_libsvm<W: Write>(ds: &Dataset, mut out: W) -> Result<()> {
    if ds.n_targets() != 1 {
        return Err(Error::Argument("LIBSVM output needs exactly one target".into()));
    }
    for i in 0..ds.n_samples() {
        write!(out, "{}", ds.targets()[(i, 0)])?;
        for (j, v) in ds.features().row(i).iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads comma- or whitespace-separated numeric rows; the last column is
/// the label. `#` starts a comment line. A first row whose first token is
/// not numeric is treated as a header.
pub fn parse_delimited<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut seen_data = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = content
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if !seen_data && tokens[0].parse::<f64>().is_err() {
            seen_data = true;
            continue;
        }
        seen_data = true;
        let nums: Vec<f64> = tokens
            .iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("non-numeric token {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if nums.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                message: "need at least one feature and a label".into(),
            });
        }
        match width {
            None => width = Some(nums.len()),
            Some(w) if w != nums.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {w} columns, found {}", nums.len()),
                })
            }
            _ => {}
        }
        let (feat, label) = nums.split_at(nums.len() - 1);
        values.extend_from_slice(feat);
        labels.push(label[0]);
    }
    let width = width.ok_or_else(|| Error::Argument("no samples in delimited input".into()))?;
    let features = DMatrix::from_row_slice(labels.len(), width - 1, &values);
    remap_labels(&mut labels);
    Dataset::with_labels(features, &labels)
}

/// Opens `path` and parses it as LIBSVM when any token contains ':',
/// otherwise as delimited text.
pub fn load_dataset(path: &std::path::Path, n_features: Option<usize>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let libsvm = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .any(|l| l.contains(':'));
    if libsvm {
        parse_libsvm(text.as_bytes(), n_features)
    } else {
        parse_delimited(text.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfMapConfig {
    pub gamma: f64,
    pub landmarks: DMatrix<f64>,
}

impl RbfMapConfig {
    pub fn new(gamma: f64, landmarks: DMatrix<f64>) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be > 0, got {gamma}")));
        }
        if landmarks.nrows() == 0 {
            return Err(Error::Parameter("at least one landmark is required".into()));
        }
        Ok(Self { gamma, landmarks })
    }

    /// Landmarks are the training rows, subsampled to at most `cap` rows with
    /// a seeded shuffle.
    pub fn from_training_rows(gamma: f64, train: &DMatrix<f64>, cap: Option<usize>, seed: u64) -> Result<Self> {
        let n = train.nrows();
        let landmarks = match cap {
            Some(c) if c < n => {
                if c == 0 {
                    return Err(Error::Parameter("landmark cap must be positive".into()));
                }
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a4d));
                idx.truncate(c);
                idx.sort_unstable();
                train.select_rows(&idx)
            }
            _ => train.clone(),
        };
        Self::new(gamma, landmarks)
    }
}

/// Entry (i, j) = exp(−γ‖x_i − l_j‖²).
pub fn rbf_feature_map(rows: &DMatrix<f64>, config: &RbfMapConfig) -> Result<DMatrix<f64>> {
    let lm = &config.landmarks;
    if rows.ncols() != lm.ncols() {
        return Err(Error::Shape {
            expected: lm.ncols(),
            got: rows.ncols(),
            context: "RBF input width vs landmark width",
        });
    }
    let (n, l, p) = (rows.nrows(), lm.nrows(), lm.ncols());
    let mapped: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..l).map(move |j| {
                let mut d2 = 0.0;
                for k in 0..p {
                    let diff = rows[(i, k)] - lm[(j, k)];
                    d2 += diff * diff;
                }
                (-config.gamma * d2).exp()
            })
        })
        .collect();
    Ok(DMatrix::from_row_slice(n, l, &mapped))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "train fraction must be in (0, 1), got {train_fraction}"
            )));
        }
        Ok(Self {
            train_fraction,
            seed,
        })
    }

    /// ⌈fraction·N⌉, kept inside [1, N−1].
    pub fn train_size(&self, n: usize) -> usize {
        let raw = (self.train_fraction * n as f64 - 1e-9).ceil() as usize;
        raw.clamp(1, n - 1)
    }

    /// Seeded permutation split into (train, test) index lists.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if n < 2 {
            return Err(Error::Argument(format!("cannot split {n} samples")));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let test = idx.split_off(self.train_size(n));
        Ok((idx, test))
    }
}

pub fn train_test_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = spec.indices(ds.n_samples())?;
    Ok((ds.select(&train)?, ds.select(&test)?))
}

/// Standardizes both matrices with the column means and deviations of
/// `train`. Constant columns are only centered.
pub fn standardize(train: &DMatrix<f64>, test: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = train.nrows() as f64;
    let mut tr = train.clone();
    let mut te = test.clone();
    for j in 0..train.ncols() {
        let mean = train.column(j).sum() / n;
        let var = train.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        tr.column_mut(j).apply(|v| *v = (*v - mean) / sd);
        te.column_mut(j).apply(|v| *v = (*v - mean) / sd);
    }
    (tr, te)
}

/// Endless sequence of mini-batches: every epoch is a fresh seeded shuffle
/// of 0..N cut into ⌈N/m⌉ batches, the last one possibly short. With m = N
/// each batch is simply 0..N in order.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    m: usize,
    rng: ChaCha8Rng,
    current: Vec<Vec<usize>>,
    epoch: usize,
}

impl BatchSampler {
    pub fn new(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Argument("batch size and sample count must be positive".into()));
        }
        if m > n {
            return Err(Error::Argument(format!("batch size {m} exceeds sample count {n}")));
        }
        Ok(Self {
            n,
            m,
            rng: ChaCha8Rng::seed_from_u64(seed),
            current: Vec::new(),
            epoch: 0,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.n.div_ceil(self.m)
    }

    /// Number of epochs started so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// All batches of the next epoch.
    pub fn next_epoch(&mut self) -> Vec<Vec<usize>> {
        self.epoch += 1;
        let mut idx: Vec<usize> = (0..self.n).collect();
        if self.m < self.n {
            idx.shuffle(&mut self.rng);
        }
        idx.chunks(self.m).map(<[usize]>::to_vec).collect()
    }
}

impl Iterator for BatchSampler {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.current.is_empty() {
            let mut batches = self.next_epoch();
            batches.reverse();
            self.current = batches;
        }
        self.current.pop()
    }
}

/// Convenience wrapper over [`BatchSampler`].
pub fn sample_batches(n: usize, m: usize, seed: u64) -> Result<BatchSampler> {
    BatchSampler::new(n, m, seed)
}

/// Two Gaussian clusters centred at ±(separation/√p)·1 with unit-free
/// spread 0.5; labels 1 for the positive cluster, 0 otherwise.
pub fn two_cluster_dataset(n: usize, n_features: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || n_features == 0 {
        return Err(Error::Argument("need at least 2 samples and 1 feature".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).map_err(|e| Error::Parameter(e.to_string()))?;
    let offset = separation / (2.0 * (n_features as f64).sqrt());
    let mut features = DMatrix::zeros(n, n_features);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let positive = i % 2 == 0;
        let centre = if positive { offset } else { -offset };
        for j in 0..n_features {
            features[(i, j)] = centre + noise.sample(&mut rng);
        }
        labels.push(if positive { 1.0 } else { 0.0 });
    }
    Dataset::with_labels(features, &labels)
}
