//! Shared domain types: the optimization variable and the sample container.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, check_len, Error, Result};

/// The optimization variable together with the number of updates applied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: DVector<f64>,
    iteration: usize,
}

impl ParameterVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        check_finite(values.as_slice(), "theta")?;
        Ok(Self {
            values,
            iteration: 0,
        })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: DVector::zeros(n),
            iteration: 0,
        }
    }

    /// Builds the successor of `self` after one update, bumping the counter.
    pub fn advance(&self, values: DVector<f64>) -> Result<Self> {
        check_len(self.len(), values.len(), "updated parameter vector")?;
        check_finite(values.as_slice(), "updated theta")?;
        Ok(Self {
            values,
            iteration: self.iteration + 1,
        })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }
}

impl std::ops::Index<usize> for ParameterVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Features (N x n_p) and targets (N x d), row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    targets: DMatrix<f64>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, targets: DMatrix<f64>) -> Result<Self> {
        check_len(features.nrows(), targets.nrows(), "target rows vs feature rows")?;
        if features.nrows() == 0 {
            return Err(Error::Argument("dataset has no rows".into()));
        }
        if targets.ncols() == 0 {
            return Err(Error::Argument("dataset has no target columns".into()));
        }
        check_finite(features.as_slice(), "features")?;
        check_finite(targets.as_slice(), "targets")?;
        Ok(Self { features, targets })
    }

    /// Single-target dataset from a feature matrix and a label vector.
    pub fn with_labels(features: DMatrix<f64>, labels: &[f64]) -> Result<Self> {
        Self::new(features, DMatrix::from_column_slice(labels.len(), 1, labels))
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }

    pub fn feature_row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    pub fn target_row(&self, i: usize) -> Vec<f64> {
        self.targets.row(i).iter().copied().collect()
    }

    /// True when every target is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.targets.iter().all(|&y| y == 0.0 || y == 1.0)
    }

    pub fn require_binary(&self) -> Result<()> {
        match self.targets.iter().find(|&&y| y != 0.0 && y != 1.0) {
            Some(y) => Err(Error::Domain(format!("binary target expected, found {y}"))),
            None => Ok(()),
        }
    }

    /// New dataset made of the given rows, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let n = self.n_samples();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Index { index: bad, len: n });
        }
        let features = self.features.select_rows(indices);
        let targets = self.targets.select_rows(indices);
        Self::new(features, targets)
    }

    /// Same targets, replaced features (used after a feature map).
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Self> {
        Self::new(features, self.targets.clone())
    }
}
