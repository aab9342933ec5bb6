//! The regularized empirical objective L(θ) = Σ_n ℓ(y_n, ŷ_n) + λ h(θ)
//! over a model and a dataset.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::loss::{FitLoss, FitLossEval};
use crate::model::{Model, ModelEval};
use crate::regularizer::Regularizer;
use crate::types::Dataset;

pub struct Objective<'a> {
    pub model: &'a dyn Model,
    pub data: &'a Dataset,
    pub loss: FitLoss,
    pub regularizer: Regularizer,
    pub lambda: f64,
}

/// Model and loss evaluated on one sample.
#[derive(Debug, Clone)]
pub struct SampleEval {
    pub index: usize,
    pub model: ModelEval,
    pub loss: FitLossEval,
}

impl<'a> Objective<'a> {
    pub fn new(
        model: &'a dyn Model,
        data: &'a Dataset,
        loss: FitLoss,
        regularizer: Regularizer,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be > 0, got {lambda}")));
        }
        check_len(model.input_dim(), data.n_features(), "model input width vs features")?;
        check_len(model.output_dim(), data.n_targets(), "model outputs vs targets")?;
        if matches!(loss, FitLoss::CrossEntropy(_)) {
            data.require_binary()?;
        }
        Ok(Self {
            model,
            data,
            loss,
            regularizer,
            lambda,
        })
    }

    pub fn n_params(&self) -> usize {
        self.model.n_params()
    }

    pub fn n_samples(&self) -> usize {
        self.data.n_samples()
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.n_samples()).collect()
    }

    /// Evaluates model and loss on every sample of the batch, in batch order.
    pub fn evaluate_samples(&self, theta: &[f64], batch: &[usize]) -> Result<Vec<SampleEval>> {
        check_len(self.n_params(), theta.len(), "parameter vector")?;
        let n = self.n_samples();
        batch
            .par_iter()
            .map(|&index| {
                if index >= n {
                    return Err(Error::Index { index, len: n });
                }
                let x = self.data.feature_row(index);
                let y = self.data.target_row(index);
                let model = self.model.eval(theta, &x)?;
                if model.prediction.iter().chain(model.jacobian.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteSample {
                        index,
                        detail: "model prediction or Jacobian".into(),
                    });
                }
                let loss = self.loss.evaluate(&y, &model.prediction)?;
                if !loss.loss.is_finite() || loss.residual.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteSample {
                        index,
                        detail: "loss or residual".into(),
                    });
                }
                Ok(SampleEval { index, model, loss })
            })
            .collect()
    }

    /// Σ_{n∈batch} ℓ + λh.
    pub fn value(&self, theta: &[f64], batch: &[usize]) -> Result<f64> {
        let fit = self.fit_loss(theta, batch)?;
        Ok(fit + self.lambda * self.regularizer.value(theta))
    }

    /// Σ_{n∈batch} ℓ without the regularizer.
    pub fn fit_loss(&self, theta: &[f64], batch: &[usize]) -> Result<f64> {
        check_len(self.n_params(), theta.len(), "parameter vector")?;
        let n = self.n_samples();
        let losses: Vec<f64> = batch
            .par_iter()
            .map(|&index| {
                if index >= n {
                    return Err(Error::Index { index, len: n });
                }
                let x = self.data.feature_row(index);
                let y = self.data.target_row(index);
                let pred = self.model.predict(theta, &x)?;
                self.loss.loss(&y, &pred)
            })
            .collect::<Result<_>>()?;
        // Fixed summation order.
        Ok(losses.iter().sum())
    }

    /// The function the Gauss-Newton residuals differentiate:
    /// Σ surrogate + λh. Equal to [`Objective::value`] except in deviance mode.
    pub fn surrogate_value(&self, theta: &[f64], batch: &[usize]) -> Result<f64> {
        let samples = self.evaluate_samples(theta, batch)?;
        let fit: f64 = samples.iter().map(|s| s.loss.surrogate).sum();
        Ok(fit + self.lambda * self.regularizer.value(theta))
    }

    /// Exact gradient of [`Objective::value`] (the loss-derivative chain, not
    /// the deviance surrogate).
    pub fn gradient(&self, theta: &[f64], batch: &[usize]) -> Result<DVector<f64>> {
        let plain = match self.loss {
            FitLoss::Squared => FitLoss::Squared,
            FitLoss::CrossEntropy(_) => {
                FitLoss::CrossEntropy(crate::loss::ResidualMode::LossGradient)
            }
        };
        let view = Objective {
            model: self.model,
            data: self.data,
            loss: plain,
            regularizer: self.regularizer,
            lambda: self.lambda,
        };
        let samples = view.evaluate_samples(theta, batch)?;
        let mut g = DVector::zeros(self.n_params());
        for s in &samples {
            for (k, &e) in s.loss.residual.iter().enumerate() {
                let c = e * s.loss.residual_jacobian_scale[k];
                g.axpy(c, &s.model.jacobian.row(k).transpose(), 1.0);
            }
        }
        let reg = self.regularizer.evaluate(theta)?;
        g.axpy(self.lambda, &reg.gradient, 1.0);
        Ok(g)
    }

    /// Predictions for every sample of the dataset.
    pub fn predictions(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        (0..self.n_samples())
            .into_par_iter()
            .map(|i| self.model.predict(theta, &self.data.feature_row(i)))
            .collect()
    }
}
