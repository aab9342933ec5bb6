//! Coordinate-separable, strongly convex regularizers h(θ) = Σ_j r(θ_j).
//!
//! Only the diagonal of the Hessian is ever exposed; the optimizer relies on
//! this to replace every product with H_h⁻¹ by a column scaling.

use nalgebra::DVector;

use crate::error::{check_finite, Error, Result};

/// Default self-concordance constant for both shipped regularizers.
pub const DEFAULT_SELF_CONCORDANCE: f64 = 1.0;

/// Value, derivatives and self-concordance constant of h at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerBundle {
    pub value: f64,
    pub gradient: DVector<f64>,
    /// Diagonal of the Hessian; strictly positive.
    pub hess_diag: DVector<f64>,
    pub self_concordance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    /// √(μ² + θ²) − μ per coordinate.
    PseudoHuber { mu: f64, self_concordance: f64 },
    /// θ² per coordinate, i.e. ‖θ‖².
    L2 { self_concordance: f64 },
}

impl Regularizer {
    pub fn pseudo_huber(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Parameter(format!("pseudo-Huber mu must be > 0, got {mu}")));
        }
        Ok(Regularizer::PseudoHuber {
            mu,
            self_concordance: DEFAULT_SELF_CONCORDANCE,
        })
    }

    pub fn l2() -> Self {
        Regularizer::L2 {
            self_concordance: DEFAULT_SELF_CONCORDANCE,
        }
    }

    /// Overrides the declared self-concordance constant M_h.
    pub fn with_self_concordance(self, m_h: f64) -> Result<Self> {
        if !(m_h >= 0.0 && m_h.is_finite()) {
            return Err(Error::Parameter(format!("M_h must be >= 0, got {m_h}")));
        }
        Ok(match self {
            Regularizer::PseudoHuber { mu, .. } => Regularizer::PseudoHuber {
                mu,
                self_concordance: m_h,
            },
            Regularizer::L2 { .. } => Regularizer::L2 {
                self_concordance: m_h,
            },
        })
    }

    pub fn self_concordance(&self) -> f64 {
        match *self {
            Regularizer::PseudoHuber {
                self_concordance, ..
            }
            | Regularizer::L2 { self_concordance } => self_concordance,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::PseudoHuber { .. } => "pseudo-huber",
            Regularizer::L2 { .. } => "l2",
        }
    }

    /// Scalar value r(t) and its first three derivatives.
    pub fn scalar_derivatives(&self, t: f64) -> [f64; 4] {
        match *self {
            Regularizer::PseudoHuber { mu, .. } => {
                let s = mu * mu + t * t;
                let root = s.sqrt();
                let mu2 = mu * mu;
                [
                    root - mu,
                    t / root,
                    mu2 / (s * root),
                    -3.0 * mu2 * t / (s * s * root),
                ]
            }
            Regularizer::L2 { .. } => [t * t, 2.0 * t, 2.0, 0.0],
        }
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        theta.iter().map(|&t| self.scalar_derivatives(t)[0]).sum()
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<RegularizerBundle> {
        check_finite(theta, "theta")?;
        let n = theta.len();
        let mut gradient = DVector::zeros(n);
        let mut hess_diag = DVector::zeros(n);
        let mut value = 0.0;
        for (j, &t) in theta.iter().enumerate() {
            let [r, dr, d2r, _] = self.scalar_derivatives(t);
            value += r;
            gradient[j] = dr;
            hess_diag[j] = d2r;
        }
        Ok(RegularizerBundle {
            value,
            gradient,
            hess_diag,
            self_concordance: self.self_concordance(),
        })
    }

    /// Slack of the scalar self-concordance inequality
    /// `2 M_h r''(t)^{3/2} - |r'''(t)|`; non-negative where it holds.
    pub fn self_concordance_slack(&self, t: f64) -> f64 {
        let [_, _, d2, d3] = self.scalar_derivatives(t);
        2.0 * self.self_concordance() * d2.powf(1.5) - d3.abs()
    }

    /// Largest |t| for which the scalar self-concordance inequality holds
    /// with the declared M_h. Pseudo-Huber's third derivative decays more
    /// slowly than r''^{3/2}, so the inequality only holds on a bounded
    /// interval; ℓ² satisfies it everywhere.
    pub fn self_concordance_radius(&self) -> f64 {
        match *self {
            Regularizer::L2 { .. } => f64::INFINITY,
            Regularizer::PseudoHuber {
                mu,
                self_concordance,
            } => {
                // Equality 3|t| = 2 M_h μ (μ² + t²)^{1/4}; with u = t² this is
                // 81 u² = 16 M_h⁴ μ⁴ (μ² + u).
                let c = 16.0 * self_concordance.powi(4) * mu.powi(4);
                let u = (c + (c * c + 4.0 * 81.0 * c * mu * mu).sqrt()) / (2.0 * 81.0);
                u.sqrt()
            }
        }
    }
}

/// Pseudo-Huber bundle with the default M_h.
pub fn pseudo_huber(theta: &[f64], mu: f64) -> Result<RegularizerBundle> {
    Regularizer::pseudo_huber(mu)?.evaluate(theta)
}

/// ℓ² bundle with the default M_h.
pub fn l2_regularizer(theta: &[f64]) -> Result<RegularizerBundle> {
    Regularizer::l2().evaluate(theta)
}
