//! Fit losses ℓ(y, ŷ) with the per-sample residual e_n and curvature q_n
//! consumed by the Gauss-Newton assembly.

use crate::error::{check_len, Error, Result};

/// Predictions are clamped into [PROB_CLIP, 1 - PROB_CLIP] before any log.
pub const PROB_CLIP: f64 = 1e-12;

/// Which residual the cross-entropy loss hands to the Gauss-Newton system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualMode {
    /// e = ∂ℓ/∂ŷ, q = ∂²ℓ/∂ŷ².
    LossGradient,
    /// Signed deviance residual with q = 1; the Jacobian row is rescaled by
    /// ∂e/∂ŷ so that Jᵀe is the gradient of ½Σe².
    Deviance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitLoss {
    Squared,
    CrossEntropy(ResidualMode),
}

/// Per-sample loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FitLossEval {
    /// ℓ(y, ŷ).
    pub loss: f64,
    /// The function whose ŷ-gradient is `residual * residual_jacobian_scale`:
    /// ℓ itself except in deviance mode, where it is ½Σe².
    pub surrogate: f64,
    pub residual: Vec<f64>,
    pub curvature: Vec<f64>,
    pub residual_jacobian_scale: Vec<f64>,
}

impl FitLoss {
    pub fn evaluate(&self, y: &[f64], y_hat: &[f64]) -> Result<FitLossEval> {
        match *self {
            FitLoss::Squared => squared_loss(y, y_hat),
            FitLoss::CrossEntropy(mode) => cross_entropy_loss(y, y_hat, mode),
        }
    }

    /// ℓ(y, ŷ) alone, without derivatives.
    pub fn loss(&self, y: &[f64], y_hat: &[f64]) -> Result<f64> {
        Ok(self.evaluate(y, y_hat)?.loss)
    }

    pub fn name(&self) -> &'static str {
        match self {
            FitLoss::Squared => "squared",
            FitLoss::CrossEntropy(ResidualMode::LossGradient) => "cross-entropy",
            FitLoss::CrossEntropy(ResidualMode::Deviance) => "cross-entropy-deviance",
        }
    }
}

pub fn squared_loss(y: &[f64], y_hat: &[f64]) -> Result<FitLossEval> {
    check_len(y.len(), y_hat.len(), "squared loss prediction")?;
    let residual: Vec<f64> = y_hat.iter().zip(y).map(|(p, t)| p - t).collect();
    let loss = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();
    let d = y.len();
    Ok(FitLossEval {
        loss,
        surrogate: loss,
        residual,
        curvature: vec![1.0; d],
        residual_jacobian_scale: vec![1.0; d],
    })
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

/// ½[y ln(1/ŷ) + (1−y) ln(1/(1−ŷ))] summed over outputs.
pub fn cross_entropy_loss(y: &[f64], y_hat: &[f64], mode: ResidualMode) -> Result<FitLossEval> {
    check_len(y.len(), y_hat.len(), "cross-entropy prediction")?;
    let d = y.len();
    let mut out = FitLossEval {
        loss: 0.0,
        surrogate: 0.0,
        residual: Vec::with_capacity(d),
        curvature: Vec::with_capacity(d),
        residual_jacobian_scale: Vec::with_capacity(d),
    };
    for (&t, &p) in y.iter().zip(y_hat) {
        if t != 0.0 && t != 1.0 {
            return Err(Error::Domain(format!("cross-entropy label must be 0 or 1, got {t}")));
        }
        if p.is_nan() {
            return Err(Error::Numeric("NaN prediction".into()));
        }
        let p = clamp_probability(p);
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Numeric(format!("prediction {p} outside (0, 1)")));
        }
        // Unscaled binomial deviance contribution c = -[y ln p + (1-y) ln(1-p)].
        let c = -(t * p.ln() + (1.0 - t) * (-p).ln_1p());
        let dc = -t / p + (1.0 - t) / (1.0 - p);
        out.loss += 0.5 * c;
        match mode {
            ResidualMode::LossGradient => {
                out.surrogate += 0.5 * c;
                out.residual.push(0.5 * dc);
                out.curvature
                    .push(0.5 * (t / (p * p) + (1.0 - t) / ((1.0 - p) * (1.0 - p))));
                out.residual_jacobian_scale.push(1.0);
            }
            ResidualMode::Deviance => {
                let sign = if t == 1.0 { 1.0 } else { -1.0 };
                let e = sign * (2.0 * c).sqrt();
                out.surrogate += 0.5 * e * e;
                out.residual.push(e);
                out.curvature.push(1.0);
                // d(½e²)/dp = dc, hence de/dp = dc / e.
                out.residual_jacobian_scale
                    .push(if e != 0.0 { dc / e } else { 0.0 });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2_HALF: f64 = 0.346_573_590_279_972_65;
    const SQRT_2LN2: f64 = 1.177_410_022_515_474_7;

    #[test]
    fn squared_examples() {
        let e = squared_loss(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        assert_eq!(e.loss, 0.0);
        assert_eq!(e.residual, vec![0.0, 0.0]);
        let e = squared_loss(&[0.0], &[2.0]).unwrap();
        assert_eq!(e.loss, 2.0);
        assert_eq!(e.residual, vec![2.0]);
        assert_eq!(e.curvature, vec![1.0]);
        let e = squared_loss(&[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(e.loss, 1.0);
        assert_eq!(e.residual, vec![-1.0, 1.0]);
        assert!(matches!(squared_loss(&[1.0], &[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn cross_entropy_examples() {
        let e = cross_entropy_loss(&[1.0], &[0.5], ResidualMode::Deviance).unwrap();
        assert_relative_eq!(e.loss, LN2_HALF, max_relative = 1e-14);
        assert_relative_eq!(e.residual[0], SQRT_2LN2, max_relative = 1e-14);
        let e = cross_entropy_loss(&[0.0], &[0.5], ResidualMode::Deviance).unwrap();
        assert_relative_eq!(e.residual[0], -SQRT_2LN2, max_relative = 1e-14);
        let e = cross_entropy_loss(&[1.0], &[0.5], ResidualMode::LossGradient).unwrap();
        assert_relative_eq!(e.curvature[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(e.residual[0], -1.0, max_relative = 1e-14);
    }

    #[test]
    fn perfect_fit_limit() {
        let e = cross_entropy_loss(&[1.0], &[1.0], ResidualMode::Deviance).unwrap();
        assert!(e.loss < 1e-11);
        assert!(e.residual[0].abs() < 2e-6);
        assert!(e.residual[0].is_finite() && e.residual_jacobian_scale[0].is_finite());
        let e = cross_entropy_loss(&[0.0], &[0.0], ResidualMode::LossGradient).unwrap();
        assert!(e.loss < 1e-11);
    }

    #[test]
    fn cross_entropy_errors() {
        assert!(matches!(
            cross_entropy_loss(&[0.5], &[0.5], ResidualMode::Deviance),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            cross_entropy_loss(&[1.0], &[f64::NAN], ResidualMode::Deviance),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn residuals_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..200 {
            let y = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            let p: f64 = rng.random_range(0.05..0.95);
            let lg = |q: f64| cross_entropy_loss(&[y], &[q], ResidualMode::LossGradient).unwrap();
            let fd = (lg(p + h).loss - lg(p - h).loss) / (2.0 * h);
            assert!((lg(p).residual[0] - fd).abs() <= 1e-6 * fd.abs().max(1.0));
            let fd2 = (lg(p + h).residual[0] - lg(p - h).residual[0]) / (2.0 * h);
            assert!((lg(p).curvature[0] - fd2).abs() <= 1e-5 * fd2.abs().max(1.0));
            assert!(lg(p).curvature[0] > 0.0);

            let dv = |q: f64| cross_entropy_loss(&[y], &[q], ResidualMode::Deviance).unwrap();
            let half_sq = |q: f64| 0.5 * dv(q).residual[0].powi(2);
            let fd = (half_sq(p + h) - half_sq(p - h)) / (2.0 * h);
            let chain = dv(p).residual[0] * dv(p).residual_jacobian_scale[0];
            assert!((chain - fd).abs() <= 1e-6 * fd.abs().max(1.0));
            // ½e² is twice the ½-scaled cross-entropy.
            assert_relative_eq!(dv(p).surrogate, 2.0 * dv(p).loss, max_relative = 1e-12);
        }
    }
}
