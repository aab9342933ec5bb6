//! First-order and quasi-Newton baselines: SGD, Adam and L-BFGS with a
//! fixed learning rate (no line search).

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::error::{check_finite, check_len, Error, Result};
use crate::types::ParameterVector;

/// Pairs with sᵀy at or below this are dropped from L-BFGS memory.
pub const CURVATURE_EPS: f64 = 1e-10;

fn check_lr(lr: f64) -> Result<()> {
    if lr > 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("learning rate must be > 0, got {lr}")))
    }
}

/// θ' = θ − lr·g.
pub fn sgd_step(theta: &ParameterVector, gradient: &DVector<f64>, lr: f64) -> Result<ParameterVector> {
    check_lr(lr)?;
    check_len(theta.len(), gradient.len(), "gradient")?;
    check_finite(gradient.as_slice(), "gradient")?;
    theta.advance(theta.values() - gradient * lr)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: DVector<f64>,
    pub v: DVector<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Result<Self> {
        check_lr(lr)?;
        Ok(Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: DVector::zeros(n),
            v: DVector::zeros(n),
            t: 0,
        })
    }

    pub fn step(&mut self, theta: &ParameterVector, gradient: &DVector<f64>) -> Result<ParameterVector> {
        check_len(self.m.len(), gradient.len(), "gradient")?;
        check_len(self.m.len(), theta.len(), "parameter vector")?;
        check_finite(gradient.as_slice(), "gradient")?;
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        self.m = &self.m * b1 + gradient * (1.0 - b1);
        self.v = &self.v * b2 + gradient.component_mul(gradient) * (1.0 - b2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let update = DVector::from_fn(theta.len(), |i, _| {
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            self.lr * m_hat / (v_hat.sqrt() + self.eps)
        });
        theta.advance(theta.values() - update)
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(
    state: &AdamState,
    theta: &ParameterVector,
    gradient: &DVector<f64>,
) -> Result<(AdamState, ParameterVector)> {
    let mut next = state.clone();
    let theta = next.step(theta, gradient)?;
    Ok((next, theta))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsState {
    pub lr: f64,
    pub memory: usize,
    pairs: VecDeque<(DVector<f64>, DVector<f64>)>,
    last: Option<(DVector<f64>, DVector<f64>)>,
}

impl LbfgsState {
    pub fn new(lr: f64, memory: usize) -> Result<Self> {
        check_lr(lr)?;
        if memory == 0 {
            return Err(Error::Parameter("L-BFGS memory must be positive".into()));
        }
        Ok(Self {
            lr,
            memory,
            pairs: VecDeque::with_capacity(memory),
            last: None,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Stores (s, y) if sᵀy > CURVATURE_EPS; returns whether it was kept.
    pub fn push_pair(&mut self, s: DVector<f64>, y: DVector<f64>) -> bool {
        if s.dot(&y) <= CURVATURE_EPS {
            return false;
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y));
        true
    }

    /// Two-loop recursion: H_k g with H₀ = γI, γ = sᵀy / yᵀy of the newest
    /// pair (γ = 1 with empty memory).
    pub fn direction(&self, gradient: &DVector<f64>) -> DVector<f64> {
        let mut q = gradient.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y) in self.pairs.iter().rev() {
            let rho = 1.0 / s.dot(y);
            let a = rho * s.dot(&q);
            q.axpy(-a, y, 1.0);
            alphas.push((a, rho));
        }
        let gamma = match self.pairs.back() {
            Some((s, y)) => s.dot(y) / y.dot(y),
            None => 1.0,
        };
        let mut r = q * gamma;
        for ((s, y), (a, rho)) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * y.dot(&r);
            r.axpy(a - b, s, 1.0);
        }
        r
    }

    /// θ' = θ − lr·H_k g. The (s, y) pair for the previous step is formed
    /// from the stored previous point and gradient.
    pub fn step(&mut self, theta: &ParameterVector, gradient: &DVector<f64>) -> Result<ParameterVector> {
        check_len(theta.len(), gradient.len(), "gradient")?;
        check_finite(gradient.as_slice(), "gradient")?;
        if let Some((prev_theta, prev_grad)) = self.last.take() {
            let s = theta.values() - prev_theta;
            let y = gradient - prev_grad;
            self.push_pair(s, y);
        }
        let dir = self.direction(gradient);
        if dir.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite L-BFGS direction".into()));
        }
        self.last = Some((theta.values().clone(), gradient.clone()));
        theta.advance(theta.values() - dir * self.lr)
    }
}

/// Functional form of [`LbfgsState::step`].
pub fn lbfgs_step(
    state: &LbfgsState,
    theta: &ParameterVector,
    gradient: &DVector<f64>,
) -> Result<(LbfgsState, ParameterVector)> {
    let mut next = state.clone();
    let theta = next.step(theta, gradient)?;
    Ok((next, theta))
}
