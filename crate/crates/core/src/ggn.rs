//! Generalized Gauss-Newton steps with self-concordant regularization.
//!
//! For a mini-batch of m samples with d outputs each, the regularized
//! objective Σℓ + λh is written through an augmented Jacobian J of size
//! M x n_w (M = dm + 1) whose last row is λ∇h, a residual e whose last
//! entry is 1, and a curvature diagonal Q whose last entry is 0. Then
//! Jᵀe is the exact gradient and JᵀQJ + λH_h is the modified GGN Hessian.
//!
//! The step
//!
//! ```text
//! θ ← θ − ρ H_h⁻¹ Jᵀ (λI + Q J H_h⁻¹ Jᵀ)⁻¹ e,   ρ = α / (1 + M_h η),
//! η = ⟨g_h, H_h⁻¹ g_h⟩^{1/2}
//! ```
//!
//! only factors an M x M matrix. H_h is diagonal, so H_h⁻¹Jᵀ is a column
//! scaling of Jᵀ and no n_w x n_w matrix is ever formed on this path. The
//! equivalent n_w x n_w form −(JᵀQJ + λH_h)⁻¹Jᵀe is kept as
//! [`direct_step`] for validation and for small problems.

// The negated comparisons below also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, check_len, Error, Result};
use crate::objective::Objective;
use crate::regularizer::RegularizerBundle;
use crate::types::ParameterVector;

/// Default cap on the size of the dense systems we are willing to factor.
pub const DEFAULT_MAX_SYSTEM_SIZE: usize = 8192;
/// Accept a solve when ‖A b − rhs‖ ≤ SOLVE_TOLERANCE · ‖rhs‖.
pub const SOLVE_TOLERANCE: f64 = 1e-8;
/// Below this gradient norm a point is treated as stationary.
pub const STATIONARY_GRADIENT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    /// M x n_w; rows 0..dm are per-sample Jacobians, row M-1 is λ g_h.
    pub jacobian: DMatrix<f64>,
    /// Length M; last entry 1.
    pub residual: DVector<f64>,
    /// Length M; last entry 0.
    pub curvature: DVector<f64>,
    pub regularizer: RegularizerBundle,
    pub lambda: f64,
    /// Σℓ over the batch (the paper-form fit loss, not the surrogate).
    pub fit_loss: f64,
}

impl AugmentedSystem {
    /// Builds the augmented system from the stacked fit-loss blocks.
    ///
    /// `fit_jacobian` is dm x n_w, `fit_residual` and `fit_curvature` have
    /// length dm.
    pub fn from_parts(
        fit_jacobian: &DMatrix<f64>,
        fit_residual: &[f64],
        fit_curvature: &[f64],
        regularizer: RegularizerBundle,
        lambda: f64,
        fit_loss: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be > 0, got {lambda}")));
        }
        let rows = fit_jacobian.nrows();
        let n_w = fit_jacobian.ncols();
        check_len(rows, fit_residual.len(), "fit residual")?;
        check_len(rows, fit_curvature.len(), "fit curvature")?;
        check_len(n_w, regularizer.gradient.len(), "regularizer gradient")?;
        check_len(n_w, regularizer.hess_diag.len(), "regularizer Hessian diagonal")?;
        if let Some(&q) = fit_curvature.iter().find(|&&q| !(q >= 0.0)) {
            return Err(Error::Numeric(format!("curvature entry {q} is negative")));
        }
        if let Some(&h) = regularizer.hess_diag.iter().find(|&&h| !(h > 0.0)) {
            return Err(Error::Numeric(format!("regularizer Hessian entry {h} is not positive")));
        }
        let m_size = rows + 1;
        let mut jacobian = DMatrix::zeros(m_size, n_w);
        jacobian.rows_mut(0, rows).copy_from(fit_jacobian);
        jacobian
            .row_mut(rows)
            .copy_from(&(regularizer.gradient.transpose() * lambda));
        let mut residual = DVector::from_element(m_size, 1.0);
        residual.rows_mut(0, rows).copy_from_slice(fit_residual);
        let mut curvature = DVector::zeros(m_size);
        curvature.rows_mut(0, rows).copy_from_slice(fit_curvature);
        check_finite(jacobian.as_slice(), "augmented Jacobian")?;
        check_finite(residual.as_slice(), "augmented residual")?;
        Ok(Self {
            jacobian,
            residual,
            curvature,
            regularizer,
            lambda,
            fit_loss,
        })
    }

    /// M = dm + 1.
    pub fn m_size(&self) -> usize {
        self.residual.len()
    }

    pub fn n_params(&self) -> usize {
        self.jacobian.ncols()
    }

    /// Jᵀe, the gradient of the batch objective.
    pub fn gradient(&self) -> DVector<f64> {
        self.jacobian.tr_mul(&self.residual)
    }

    /// Σℓ + λh on the batch.
    pub fn objective(&self) -> f64 {
        self.fit_loss + self.lambda * self.regularizer.value
    }

    /// The modified GGN Hessian JᵀQJ + λH_h as a dense matrix. Only for
    /// validation and the direct solver.
    pub fn dense_hessian(&self) -> DMatrix<f64> {
        let qj = DMatrix::from_fn(self.m_size(), self.n_params(), |i, j| {
            self.curvature[i] * self.jacobian[(i, j)]
        });
        let mut h = self.jacobian.tr_mul(&qj);
        for j in 0..self.n_params() {
            h[(j, j)] += self.lambda * self.regularizer.hess_diag[j];
        }
        h
    }
}

/// Assembles the augmented system for `batch` at `theta`.
pub fn assemble_augmented(
    theta: &ParameterVector,
    batch: &[usize],
    objective: &Objective<'_>,
    max_system_size: usize,
) -> Result<AugmentedSystem> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let d = objective.model.output_dim();
    let rows = d * batch.len();
    if rows + 1 > max_system_size {
        return Err(Error::Argument(format!(
            "augmented system size {} exceeds the cap {max_system_size}",
            rows + 1
        )));
    }
    let samples = objective.evaluate_samples(theta.as_slice(), batch)?;
    let n_w = objective.n_params();
    let mut jac = DMatrix::zeros(rows, n_w);
    let mut residual = Vec::with_capacity(rows);
    let mut curvature = Vec::with_capacity(rows);
    let mut fit_loss = 0.0;
    for (s_idx, s) in samples.iter().enumerate() {
        fit_loss += s.loss.loss;
        for k in 0..d {
            let r = s_idx * d + k;
            let scale = s.loss.residual_jacobian_scale[k];
            jac.row_mut(r).copy_from(&(s.model.jacobian.row(k) * scale));
            residual.push(s.loss.residual[k]);
            curvature.push(s.loss.curvature[k]);
        }
    }
    let reg = objective.regularizer.evaluate(theta.as_slice())?;
    AugmentedSystem::from_parts(&jac, &residual, &curvature, reg, objective.lambda, fit_loss)
}

/// η = ⟨g, H⁻¹g⟩^{1/2} for a diagonal H.
pub fn newton_decrement(reg_gradient: &[f64], reg_hess_diag: &[f64]) -> Result<f64> {
    check_len(reg_gradient.len(), reg_hess_diag.len(), "Hessian diagonal")?;
    let mut acc = 0.0;
    for (&g, &h) in reg_gradient.iter().zip(reg_hess_diag) {
        if !(h > 0.0) {
            return Err(Error::Numeric(format!(
                "Hessian diagonal entry {h} is not positive"
            )));
        }
        acc += g * g / h;
    }
    Ok(acc.sqrt())
}

/// ρ = α / (1 + M_h η).
pub fn step_size(alpha: f64, self_concordance: f64, eta: f64) -> f64 {
    alpha / (1.0 + self_concordance * eta)
}

/// The scaling constant for which the local convergence bound is proved:
/// α = √γ_a (K + λγ_a) / β₁. Its inputs are rarely observable, so this is
/// only ever an explicit opt-in.
pub fn theoretical_alpha(gamma_a: f64, k: f64, beta1: f64, lambda: f64) -> Result<f64> {
    if !(gamma_a > 0.0 && k >= 0.0 && beta1 > 0.0 && lambda > 0.0) {
        return Err(Error::Parameter(
            "theoretical alpha needs gamma_a > 0, K >= 0, beta1 > 0, lambda > 0".into(),
        ));
    }
    Ok(gamma_a.sqrt() * (k + lambda * gamma_a) / beta1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Factor the M x M matrix λI + Q J H_h⁻¹ Jᵀ (LU, partial pivoting).
    Identity,
    /// Factor the n_w x n_w matrix JᵀQJ + λH_h (Cholesky).
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GgnScoreConfig {
    pub alpha: f64,
    pub self_concordance: f64,
    pub solver: SolverKind,
    pub max_system_size: usize,
}

impl Default for GgnScoreConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            self_concordance: 1.0,
            solver: SolverKind::Identity,
            max_system_size: DEFAULT_MAX_SYSTEM_SIZE,
        }
    }
}

impl GgnScoreConfig {
    pub fn new(alpha: f64, self_concordance: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            self_concordance,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// α = 1 and M_h = 0, i.e. ρ = 1: the undamped Gauss-Newton step.
    pub fn unit_step() -> Self {
        Self {
            alpha: 1.0,
            self_concordance: 0.0,
            ..Self::default()
        }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.self_concordance >= 0.0 && self.self_concordance.is_finite()) {
            return Err(Error::Parameter(format!(
                "M_h must be >= 0, got {}",
                self.self_concordance
            )));
        }
        if self.max_system_size < 2 {
            return Err(Error::Parameter("max_system_size must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Batch objective Σℓ + λh at θ_k.
    pub loss_before: f64,
    /// Filled in by drivers that re-evaluate the batch after the step.
    pub loss_after: Option<f64>,
    pub grad_norm: f64,
    pub eta: f64,
    pub rho: f64,
    pub step_norm: f64,
    pub solve_residual_norm: f64,
    pub wall_time: Duration,
}

/// Unscaled direction G with θ_{k+1} = θ_k − ρG, plus the absolute residual
/// of the linear solve that produced it.
#[derive(Debug, Clone)]
pub struct Direction {
    pub direction: DVector<f64>,
    pub solve_residual_norm: f64,
}

/// G = H_h⁻¹ Jᵀ b with (λI + Q J H_h⁻¹ Jᵀ) b = e.
pub fn identity_direction(system: &AugmentedSystem) -> Result<Direction> {
    let m = system.m_size();
    let inv_h = system.regularizer.hess_diag.map(|h| 1.0 / h);
    // (H_h⁻¹ Jᵀ)ᵀ = J H_h⁻¹: scale columns of J.
    let mut j_hinv = system.jacobian.clone();
    for (j, mut col) in j_hinv.column_iter_mut().enumerate() {
        col *= inv_h[j];
    }
    let kernel = &j_hinv * system.jacobian.transpose();
    let mut a = kernel;
    for i in 0..m {
        let q = system.curvature[i];
        for j in 0..m {
            a[(i, j)] *= q;
        }
        a[(i, i)] += system.lambda;
    }
    let e = &system.residual;
    let b = lu_solve(&a, e)?;
    let solve_residual_norm = (&a * &b - e).norm();
    if !(solve_residual_norm <= SOLVE_TOLERANCE * e.norm()) {
        return Err(Error::Solver(format!(
            "M x M solve residual {solve_residual_norm:e} exceeds tolerance (‖e‖ = {:e})",
            e.norm()
        )));
    }
    let direction = j_hinv.tr_mul(&b);
    Ok(Direction {
        direction,
        solve_residual_norm,
    })
}

/// G = (JᵀQJ + λH_h)⁻¹ Jᵀe via Cholesky.
pub fn direct_direction(system: &AugmentedSystem) -> Result<Direction> {
    let h = system.dense_hessian();
    let g = system.gradient();
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("modified GGN Hessian is not positive definite".into()))?;
    let direction = chol.solve(&g);
    let solve_residual_norm = (&h * &direction - &g).norm();
    if !(solve_residual_norm <= SOLVE_TOLERANCE * g.norm()) {
        return Err(Error::Solver(format!(
            "n_w x n_w solve residual {solve_residual_norm:e} exceeds tolerance"
        )));
    }
    Ok(Direction {
        direction,
        solve_residual_norm,
    })
}

fn lu_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let u = lu.u();
    let diag_max = u.diagonal().amax();
    let diag_min = u.diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if !(diag_min > 1e-14 * diag_max) {
        return Err(Error::Solver(format!(
            "LU pivot {diag_min:e} is negligible relative to {diag_max:e}"
        )));
    }
    let mut x = lu
        .solve(rhs)
        .ok_or_else(|| Error::Solver("singular M x M system".into()))?;
    // One step of iterative refinement.
    let r = rhs - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite solution of the M x M system".into()));
    }
    Ok(x)
}

/// One GGN-SCORE update: θ' = θ − ρ_k G.
pub fn ggn_score_step(
    theta: &ParameterVector,
    system: &AugmentedSystem,
    config: &GgnScoreConfig,
) -> Result<(ParameterVector, StepReport)> {
    let start = Instant::now();
    config.validate()?;
    check_len(system.n_params(), theta.len(), "parameter vector vs system")?;
    let dir = match config.solver {
        SolverKind::Identity => {
            if system.m_size() > config.max_system_size {
                return Err(Error::Argument(format!(
                    "M = {} exceeds the cap {}",
                    system.m_size(),
                    config.max_system_size
                )));
            }
            identity_direction(system)?
        }
        SolverKind::Direct => {
            if system.n_params() > config.max_system_size {
                return Err(Error::Argument(format!(
                    "n_w = {} exceeds the cap {} for the direct solver",
                    system.n_params(),
                    config.max_system_size
                )));
            }
            direct_direction(system)?
        }
    };
    let eta = newton_decrement(
        system.regularizer.gradient.as_slice(),
        system.regularizer.hess_diag.as_slice(),
    )?;
    let rho = step_size(config.alpha, config.self_concordance, eta);
    let delta = &dir.direction * (-rho);
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite step".into()));
    }
    let next = theta.advance(theta.values() + &delta)?;
    let report = StepReport {
        loss_before: system.objective(),
        loss_after: None,
        grad_norm: system.gradient().norm(),
        eta,
        rho,
        step_norm: delta.norm(),
        solve_residual_norm: dir.solve_residual_norm,
        wall_time: start.elapsed(),
    };
    Ok((next, report))
}

/// θ + δθ with δθ = −(JᵀQJ + λH_h)⁻¹Jᵀe (no step-size scaling).
pub fn direct_step(
    theta: &ParameterVector,
    system: &AugmentedSystem,
    config: &GgnScoreConfig,
) -> Result<ParameterVector> {
    check_len(system.n_params(), theta.len(), "parameter vector vs system")?;
    if system.n_params() > config.max_system_size {
        return Err(Error::Argument(format!(
            "n_w = {} exceeds the cap {} for the direct solver",
            system.n_params(),
            config.max_system_size
        )));
    }
    let dir = direct_direction(system)?;
    theta.advance(theta.values() - &dir.direction)
}

/// Whether δθ is a descent direction for the batch objective: ⟨δθ, Jᵀe⟩ < 0.
/// At a stationary point (‖Jᵀe‖ ≤ 1e-10) only ⟨δθ, Jᵀe⟩ ≤ 1e-12 is required.
pub fn descent_check(system: &AugmentedSystem, delta: &DVector<f64>) -> bool {
    let g = system.gradient();
    let inner = delta.dot(&g);
    if g.norm() <= STATIONARY_GRADIENT {
        inner <= 1e-12
    } else {
        inner < 0.0
    }
}
