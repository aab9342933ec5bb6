//! Prediction functions with per-sample Jacobians ∂ŷ/∂θ.
//!
//! Three families are provided: the scaled linear map that turns the
//! strongly convex quadratic into a row-wise least-squares sum, a sigmoid
//! classifier over (feature-mapped) inputs, and a small ReLU network with a
//! sigmoid output.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_finite, check_len, Error, Result};
use crate::types::{Dataset, ParameterVector};

/// Prediction ŷ_n (length d) and its Jacobian J_n (d x n_w).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEval {
    pub prediction: Vec<f64>,
    pub jacobian: DMatrix<f64>,
}

pub trait Model: Send + Sync {
    fn n_params(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Evaluates the model on one input row.
    fn eval(&self, theta: &[f64], input: &[f64]) -> Result<ModelEval>;

    /// Prediction only; models override this when it is cheaper.
    fn predict(&self, theta: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(theta, input)?.prediction)
    }

    fn check_shapes(&self, theta: &[f64], input: &[f64]) -> Result<()> {
        check_len(self.n_params(), theta.len(), "parameter vector")?;
        check_len(self.input_dim(), input.len(), "input row")
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ŷ = √scale · xᵀθ (no bias).
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledLinear {
    dim: usize,
    scale: f64,
}

impl ScaledLinear {
    pub fn new(dim: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Parameter(format!("scale must be > 0, got {scale}")));
        }
        Ok(Self { dim, scale })
    }
}

impl Model for ScaledLinear {
    fn n_params(&self) -> usize {
        self.dim
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        1
    }

    fn eval(&self, theta: &[f64], input: &[f64]) -> Result<ModelEval> {
        self.check_shapes(theta, input)?;
        let s = self.scale.sqrt();
        let dot: f64 = theta.iter().zip(input).map(|(t, x)| t * x).sum();
        let jacobian = DMatrix::from_iterator(1, self.dim, input.iter().map(|x| s * x));
        Ok(ModelEval {
            prediction: vec![s * dot],
            jacobian,
        })
    }
}

/// g(θ) = ½θᵀ(scale·MᵀM)θ − pᵀθ, cast as ½Σ_i (√scale·m_iᵀθ − t_i)² over
/// the rows m_i of M.
///
/// For p ≠ 0 the per-row targets are t = M(MᵀM)⁻¹p / √scale, which adds the
/// constant ½‖t‖² to the row sum; see [`QuadraticProblem::objective_offset`].
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    m: DMatrix<f64>,
    scale: f64,
    p: DVector<f64>,
    targets: DVector<f64>,
}

impl QuadraticProblem {
    pub fn new(m: DMatrix<f64>, scale: f64) -> Result<Self> {
        let n_w = m.ncols();
        Self::with_linear_term(m, scale, DVector::zeros(n_w))
    }

    pub fn with_linear_term(m: DMatrix<f64>, scale: f64, p: DVector<f64>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Parameter(format!("scale must be > 0, got {scale}")));
        }
        check_len(m.ncols(), p.len(), "linear term p")?;
        check_finite(m.as_slice(), "M")?;
        check_finite(p.as_slice(), "p")?;
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::Argument("M must be non-empty".into()));
        }
        let targets = if p.iter().all(|&v| v == 0.0) {
            DVector::zeros(m.nrows())
        } else {
            let gram = m.transpose() * &m;
            let chol = gram.cholesky().ok_or_else(|| {
                Error::Solver("MᵀM is not positive definite; p ≠ 0 needs full column rank".into())
            })?;
            (&m * chol.solve(&p)) / scale.sqrt()
        };
        Ok(Self {
            m,
            scale,
            p,
            targets,
        })
    }

    /// M with i.i.d. uniform [0, 1) entries, as in the benchmark setup.
    pub fn random_uniform<R: Rng>(rng: &mut R, n_rows: usize, n_w: usize, scale: f64) -> Result<Self> {
        let m = DMatrix::from_fn(n_rows, n_w, |_, _| rng.random::<f64>());
        Self::new(m, scale)
    }

    pub fn n_params(&self) -> usize {
        self.m.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.m.nrows()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.p
    }

    /// Q̂ = scale · MᵀM.
    pub fn hessian(&self) -> DMatrix<f64> {
        (self.m.transpose() * &self.m) * self.scale
    }

    /// g(θ) from the dense quadratic form.
    pub fn objective(&self, theta: &[f64]) -> f64 {
        let t = DVector::from_column_slice(theta);
        let mt = &self.m * &t;
        0.5 * self.scale * mt.norm_squared() - self.p.dot(&t)
    }

    /// Constant separating the row-wise least-squares sum from g(θ).
    pub fn objective_offset(&self) -> f64 {
        0.5 * self.targets.norm_squared()
    }

    pub fn model(&self) -> ScaledLinear {
        ScaledLinear {
            dim: self.n_params(),
            scale: self.scale,
        }
    }

    /// Rows of M as features, shifted targets as labels.
    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::with_labels(self.m.clone(), self.targets.as_slice())
    }

    pub fn row_target(&self, row: usize) -> Result<f64> {
        self.targets
            .get(row)
            .copied()
            .ok_or(Error::Index {
                index: row,
                len: self.n_rows(),
            })
    }

    /// Prediction and Jacobian contributed by one row of M.
    pub fn row_eval(&self, theta: &ParameterVector, row: usize) -> Result<ModelEval> {
        if row >= self.n_rows() {
            return Err(Error::Index {
                index: row,
                len: self.n_rows(),
            });
        }
        let input: Vec<f64> = self.m.row(row).iter().copied().collect();
        self.model().eval(theta.as_slice(), &input)
    }
}

/// ŷ = σ(wᵀφ + b); parameters are the weights followed by one bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidLinear {
    n_features: usize,
}

impl SigmoidLinear {
    pub fn new(n_features: usize) -> Self {
        Self { n_features }
    }
}

impl Model for SigmoidLinear {
    fn n_params(&self) -> usize {
        self.n_features + 1
    }
    fn input_dim(&self) -> usize {
        self.n_features
    }
    fn output_dim(&self) -> usize {
        1
    }

    fn eval(&self, theta: &[f64], input: &[f64]) -> Result<ModelEval> {
        self.check_shapes(theta, input)?;
        let (w, b) = theta.split_at(self.n_features);
        let z = w.iter().zip(input).map(|(a, x)| a * x).sum::<f64>() + b[0];
        let y = sigmoid(z);
        let dy = y * (1.0 - y);
        let jacobian = DMatrix::from_iterator(
            1,
            self.n_params(),
            input.iter().map(|x| dy * x).chain(std::iter::once(dy)),
        );
        Ok(ModelEval {
            prediction: vec![y],
            jacobian,
        })
    }
}

pub fn sigmoid_linear_eval(weights: &ParameterVector, feature_row: &[f64]) -> Result<ModelEval> {
    SigmoidLinear::new(feature_row.len()).eval(weights.as_slice(), feature_row)
}

/// Fully connected network: ReLU on hidden layers, sigmoid on the output.
///
/// `layer_widths` lists every layer including input and output, e.g.
/// `[n_p, 4, 16, 1]`. Parameters are stored layer by layer as a row-major
/// weight block (fan_out x fan_in) followed by the fan_out biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
}

impl Mlp {
    pub fn new(layer_widths: Vec<usize>) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::Parameter("an MLP needs at least input and output widths".into()));
        }
        if layer_widths.contains(&0) {
            return Err(Error::Parameter("layer widths must be positive".into()));
        }
        Ok(Self {
            widths: layer_widths,
        })
    }

    /// Network with the given hidden widths and a single sigmoid output.
    pub fn binary_classifier(n_inputs: usize, hidden: &[usize]) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(n_inputs);
        widths.extend_from_slice(hidden);
        widths.push(1);
        Self::new(widths)
    }

    pub fn layer_widths(&self) -> &[usize] {
        &self.widths
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.widths.windows(2).map(move |w| {
            let start = offset;
            offset += (w[0] + 1) * w[1];
            (start, w[0], w[1])
        })
    }

    /// Normal(0, std) weights and biases.
    pub fn init_normal<R: Rng>(&self, rng: &mut R, std: f64) -> Result<ParameterVector> {
        let dist = Normal::new(0.0, std).map_err(|e| Error::Parameter(e.to_string()))?;
        let values: Vec<f64> = (0..self.n_params()).map(|_| dist.sample(rng)).collect();
        ParameterVector::from_slice(&values)
    }

    /// Forward pass returning the pre-activations of every layer.
    fn forward(&self, theta: &[f64], input: &[f64]) -> Vec<Vec<f64>> {
        let mut pre = Vec::with_capacity(self.widths.len() - 1);
        let mut act: Vec<f64> = input.to_vec();
        let n_layers = self.widths.len() - 1;
        for (l, (start, fan_in, fan_out)) in self.layer_offsets().enumerate() {
            let w = &theta[start..start + fan_in * fan_out];
            let b = &theta[start + fan_in * fan_out..start + (fan_in + 1) * fan_out];
            let z: Vec<f64> = (0..fan_out)
                .map(|o| {
                    w[o * fan_in..(o + 1) * fan_in]
                        .iter()
                        .zip(&act)
                        .map(|(a, x)| a * x)
                        .sum::<f64>()
                        + b[o]
                })
                .collect();
            act = if l + 1 == n_layers {
                z.iter().map(|&v| sigmoid(v)).collect()
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            pre.push(z);
        }
        pre
    }

    /// Pre-activations of the hidden layers (used to detect ReLU kinks).
    pub fn hidden_preactivations(&self, theta: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        self.check_shapes(theta, input)?;
        let pre = self.forward(theta, input);
        Ok(pre[..pre.len() - 1].iter().flatten().copied().collect())
    }
}

impl Model for Mlp {
    fn n_params(&self) -> usize {
        self.widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }
    fn input_dim(&self) -> usize {
        self.widths[0]
    }
    fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn eval(&self, theta: &[f64], input: &[f64]) -> Result<ModelEval> {
        self.check_shapes(theta, input)?;
        let pre = self.forward(theta, input);
        let n_layers = pre.len();
        let layers: Vec<_> = self.layer_offsets().collect();
        let d = self.output_dim();
        let prediction: Vec<f64> = pre[n_layers - 1].iter().map(|&z| sigmoid(z)).collect();

        let activation = |l: usize| -> Vec<f64> {
            if l == 0 {
                input.to_vec()
            } else {
                pre[l - 1].iter().map(|&v| v.max(0.0)).collect()
            }
        };
        let inputs: Vec<Vec<f64>> = (0..n_layers).map(activation).collect();

        let mut jacobian = DMatrix::zeros(d, self.n_params());
        for k in 0..d {
            // δ = ∂ŷ_k / ∂z for the current layer.
            let mut delta = vec![0.0; d];
            delta[k] = prediction[k] * (1.0 - prediction[k]);
            for l in (0..n_layers).rev() {
                let (start, fan_in, fan_out) = layers[l];
                let x = &inputs[l];
                for o in 0..fan_out {
                    if delta[o] == 0.0 {
                        continue;
                    }
                    for i in 0..fan_in {
                        jacobian[(k, start + o * fan_in + i)] = delta[o] * x[i];
                    }
                    jacobian[(k, start + fan_in * fan_out + o)] = delta[o];
                }
                if l == 0 {
                    break;
                }
                let w = &theta[start..start + fan_in * fan_out];
                let below = &pre[l - 1];
                delta = (0..fan_in)
                    .map(|i| {
                        if below[i] > 0.0 {
                            (0..fan_out).map(|o| w[o * fan_in + i] * delta[o]).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
        Ok(ModelEval {
            prediction,
            jacobian,
        })
    }

    fn predict(&self, theta: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        self.check_shapes(theta, input)?;
        let pre = self.forward(theta, input);
        Ok(pre.last().unwrap().iter().map(|&z| sigmoid(z)).collect())
    }
}

pub fn mlp_eval(arch: &Mlp, theta: &ParameterVector, input_row: &[f64]) -> Result<ModelEval> {
    arch.eval(theta.as_slice(), input_row)
}
