//! Generalized Gauss-Newton optimization with self-concordant regularization.
//!
//! The crate solves regularized empirical risk problems
//!
//! ```text
//! min_θ  Σ_n ℓ(y_n, ŷ_n(θ)) + λ Σ_j r(θ_j)
//! ```
//!
//! with a Gauss-Newton step that only factors a (dm+1) x (dm+1) matrix per
//! mini-batch of m samples, scaled by a step size derived from the Newton
//! decrement of the (self-concordant) regularizer. Baseline optimizers,
//! data loaders and an experiment runner with CSV logging are included.
//!
//! ```
//! use ggn_score::{
//!     ggn::{assemble_augmented, ggn_score_step, GgnScoreConfig},
//!     loss::FitLoss,
//!     model::QuadraticProblem,
//!     objective::Objective,
//!     regularizer::Regularizer,
//!     types::ParameterVector,
//! };
//! use nalgebra::DMatrix;
//!
//! let q = QuadraticProblem::new(DMatrix::identity(3, 3), 0.1).unwrap();
//! let data = q.dataset().unwrap();
//! let model = q.model();
//! let obj = Objective::new(&model, &data, FitLoss::Squared, Regularizer::l2(), 0.1).unwrap();
//! let theta = ParameterVector::from_slice(&[1.0, -2.0, 0.5]).unwrap();
//! let system = assemble_augmented(&theta, &[0, 1, 2], &obj, 8192).unwrap();
//! let (next, report) = ggn_score_step(&theta, &system, &GgnScoreConfig::unit_step()).unwrap();
//! // Squared loss + ℓ² is exactly quadratic, so one undamped step is exact.
//! assert!(next.values().norm() < 1e-12);
//! assert_eq!(report.rho, 1.0);
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod experiment;
pub mod ggn;
pub mod loss;
pub mod model;
pub mod objective;
pub mod regularizer;
pub mod types;

pub use error::{Error, Result};
pub use ggn::{AugmentedSystem, GgnScoreConfig, SolverKind, StepReport};
pub use types::{Dataset, ParameterVector};
