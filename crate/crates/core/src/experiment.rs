//! Experiment orchestration: problem setup, the optimization loop for every
//! optimizer, test-set evaluation and the CSV run log.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::baselines::{sgd_step, AdamState, LbfgsState};
use crate::data::{
    load_dataset, rbf_feature_map, standardize, train_test_split, two_cluster_dataset, BatchSampler,
    RbfMapConfig, SplitSpec,
};
use crate::error::{check_len, Error, Result};
use crate::ggn::{assemble_augmented, descent_check, ggn_score_step, GgnScoreConfig, SolverKind};
use crate::loss::{FitLoss, ResidualMode};
use crate::model::{Mlp, Model, QuadraticProblem, SigmoidLinear};
use crate::objective::Objective;
use crate::regularizer::Regularizer;
use crate::types::{Dataset, ParameterVector};

pub const CSV_HEADER: &str =
    "epoch,step,train_loss,grad_norm,eta,rho,step_norm,wall_time_s,test_loss,test_accuracy";

/// Default learning-rate grid for the baselines.
pub const LR_GRID: [f64; 3] = [1e-3, 1e-2, 1e-1];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Quadratic,
    Classifier,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    GgnScore,
    Sgd,
    Adam,
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerKind {
    PseudoHuber,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    /// Normal(0, 0.01) for the quadratic and the MLP, zeros for the linear classifier.
    Default,
    Zero,
    Normal(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// Dataset file (LIBSVM or delimited); a synthetic two-cluster set is
    /// generated when absent.
    pub data: Option<PathBuf>,
    pub n_features: Option<usize>,
    /// Variable count of the synthetic quadratic.
    pub n_w: usize,
    /// Rows of M for the quadratic, or samples of the synthetic classifier set.
    pub n_samples: usize,
    /// Q̂ = scale · MᵀM.
    pub scale: f64,
    pub optimizer: OptimizerKind,
    pub regularizer: RegularizerKind,
    pub lambda: f64,
    pub alpha: f64,
    pub mu: f64,
    pub m_h: f64,
    /// None means full batch.
    pub batch_size: Option<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub lbfgs_memory: usize,
    pub gamma: f64,
    pub split: f64,
    pub seed: u64,
    pub landmark_cap: Option<usize>,
    pub solver: SolverKind,
    pub max_system_size: usize,
    pub hidden: Vec<usize>,
    pub residual_mode: ResidualMode,
    pub standardize: bool,
    pub init: InitKind,
    /// Stop as soon as the training objective reaches this value.
    pub target_loss: Option<f64>,
    /// When false the wall_time_s column is written as 0 so that logs of
    /// identical runs are byte-identical.
    pub record_wall_time: bool,
    /// Abort a convex run if a GGN-SCORE step is not a descent direction.
    pub check_descent: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Quadratic,
            data: None,
            n_features: None,
            n_w: 200,
            n_samples: 200,
            scale: 0.1,
            optimizer: OptimizerKind::GgnScore,
            regularizer: RegularizerKind::L2,
            lambda: 0.1,
            alpha: 0.5,
            mu: 1.0,
            m_h: 1.0,
            batch_size: None,
            epochs: 10,
            lr: 1e-2,
            lbfgs_memory: 10,
            gamma: 0.1,
            split: 0.8,
            seed: 0,
            landmark_cap: Some(500),
            solver: SolverKind::Identity,
            max_system_size: crate::ggn::DEFAULT_MAX_SYSTEM_SIZE,
            hidden: vec![4, 16],
            residual_mode: ResidualMode::Deviance,
            standardize: false,
            init: InitKind::Default,
            target_loss: None,
            record_wall_time: true,
            check_descent: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("mu", self.mu),
            ("lr", self.lr),
            ("gamma", self.gamma),
            ("scale", self.scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.m_h >= 0.0 && self.m_h.is_finite()) {
            return Err(Error::Parameter(format!("M_h must be >= 0, got {}", self.m_h)));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Parameter(format!("split must be in (0, 1), got {}", self.split)));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        if self.n_w == 0 || self.n_samples < 2 || self.lbfgs_memory == 0 {
            return Err(Error::Parameter("n_w, n_samples and L-BFGS memory must be positive".into()));
        }
        if self.landmark_cap == Some(0) {
            return Err(Error::Parameter("landmark cap must be positive".into()));
        }
        if let InitKind::Normal(s) = self.init {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Parameter(format!("init std must be > 0, got {s}")));
            }
        }
        Ok(())
    }

    pub fn is_convex(&self) -> bool {
        self.problem != ProblemKind::Mlp
    }

    fn regularizer(&self) -> Result<Regularizer> {
        let r = match self.regularizer {
            RegularizerKind::PseudoHuber => Regularizer::pseudo_huber(self.mu)?,
            RegularizerKind::L2 => Regularizer::l2(),
        };
        r.with_self_concordance(self.m_h)
    }

    fn fit_loss(&self) -> FitLoss {
        match self.problem {
            ProblemKind::Quadratic => FitLoss::Squared,
            _ => FitLoss::CrossEntropy(self.residual_mode),
        }
    }
}

/// One row of the run log.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    /// Full training objective Σℓ + λh after the step.
    pub train_loss: f64,
    pub grad_norm: f64,
    pub eta: Option<f64>,
    pub rho: Option<f64>,
    pub step_norm: f64,
    pub wall_time_s: f64,
}

/// Test-set metrics at the end of an epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean ℓ over the test set.
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl RunLog {
    pub fn final_train_loss(&self) -> Option<f64> {
        self.steps.last().map(|s| s.train_loss)
    }

    /// First step (1-based count) whose train loss is ≤ `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.steps.iter().find(|s| s.train_loss <= tol).map(|s| s.step)
    }

    /// Train loss at the last step of every epoch.
    pub fn epoch_train_losses(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        let mut current = None;
        for s in &self.steps {
            if current != Some(s.epoch) {
                out.push(s.train_loss);
                current = Some(s.epoch);
            } else {
                *out.last_mut().unwrap() = s.train_loss;
            }
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("step {step}: update is not a descent direction (⟨δθ, Jᵀe⟩ = {inner:e})")]
    DescentViolation { step: usize, inner: f64 },
}

/// An aborted run together with everything logged before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: ExperimentError,
    pub partial: RunLog,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} steps)", self.error, self.partial.steps.len())
    }
}

impl std::error::Error for RunFailure {}

/// Fraction of thresholded predictions matching the labels, computed as
/// (1/N) Σ (2yŷ − y − ŷ + 1) with ŷ = 1 when the probability is ≥ 0.5.
pub fn binary_accuracy(y: &[f64], y_prob: &[f64]) -> Result<f64> {
    check_len(y.len(), y_prob.len(), "accuracy predictions")?;
    if y.is_empty() {
        return Err(Error::Argument("accuracy of an empty set".into()));
    }
    let total: f64 = y
        .iter()
        .zip(y_prob)
        .map(|(&t, &p)| {
            let hat = if p >= 0.5 { 1.0 } else { 0.0 };
            2.0 * t * hat - t - hat + 1.0
        })
        .sum();
    Ok(total / y.len() as f64)
}

/// A fully prepared problem: model, data split, loss and starting point.
pub struct PreparedProblem {
    pub model: Box<dyn Model>,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub loss: FitLoss,
    pub regularizer: Regularizer,
    pub theta0: ParameterVector,
}

impl PreparedProblem {
    pub fn objective(&self, lambda: f64) -> Result<Objective<'_>> {
        Objective::new(self.model.as_ref(), &self.train, self.loss, self.regularizer, lambda)
    }
}

fn normal_init(n: usize, std: f64, rng: &mut ChaCha8Rng) -> Result<ParameterVector> {
    let dist = Normal::new(0.0, std).map_err(|e| Error::Parameter(e.to_string()))?;
    let v: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
    ParameterVector::from_slice(&v)
}

fn classification_data(config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let ds = match &config.data {
        Some(path) => load_dataset(path, config.n_features)?,
        None => two_cluster_dataset(config.n_samples, 2, 4.0, config.seed)?,
    };
    ds.require_binary()?;
    let (train, test) = train_test_split(&ds, &SplitSpec::new(config.split, config.seed)?)?;
    if config.standardize {
        let (tr, te) = standardize(train.features(), test.features());
        Ok((train.with_features(tr)?, test.with_features(te)?))
    } else {
        Ok((train, test))
    }
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedProblem> {
    config.validate()?;
    let regularizer = config.regularizer()?;
    let loss = config.fit_loss();
    // Separate streams for data generation and initialization.
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let init = |n: usize, default_std: Option<f64>, rng: &mut ChaCha8Rng| match config.init {
        InitKind::Zero => Ok(ParameterVector::zeros(n)),
        InitKind::Normal(s) => normal_init(n, s, rng),
        InitKind::Default => match default_std {
            Some(s) => normal_init(n, s, rng),
            None => Ok(ParameterVector::zeros(n)),
        },
    };
    match config.problem {
        ProblemKind::Quadratic => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let q = QuadraticProblem::random_uniform(&mut rng, config.n_samples, config.n_w, config.scale)?;
            let train = q.dataset()?;
            let theta0 = init(q.n_params(), Some(0.01), &mut init_rng)?;
            Ok(PreparedProblem {
                model: Box::new(q.model()),
                train,
                test: None,
                loss,
                regularizer,
                theta0,
            })
        }
        ProblemKind::Classifier => {
            let (train, test) = classification_data(config)?;
            let rbf = RbfMapConfig::from_training_rows(
                config.gamma,
                train.features(),
                config.landmark_cap,
                config.seed,
            )?;
            let train = train.with_features(rbf_feature_map(train.features(), &rbf)?)?;
            let test = test.with_features(rbf_feature_map(test.features(), &rbf)?)?;
            let model = SigmoidLinear::new(train.n_features());
            let theta0 = init(model.n_params(), None, &mut init_rng)?;
            Ok(PreparedProblem {
                model: Box::new(model),
                train,
                test: Some(test),
                loss,
                regularizer,
                theta0,
            })
        }
        ProblemKind::Mlp => {
            let (train, test) = classification_data(config)?;
            let mlp = Mlp::binary_classifier(train.n_features(), &config.hidden)?;
            let theta0 = init(mlp.n_params(), Some(0.01), &mut init_rng)?;
            Ok(PreparedProblem {
                model: Box::new(mlp),
                train,
                test: Some(test),
                loss,
                regularizer,
                theta0,
            })
        }
    }
}

fn test_metrics(problem: &PreparedProblem, theta: &ParameterVector) -> Result<Option<EpochRecord>> {
    let Some(test) = &problem.test else {
        return Ok(None);
    };
    let mut loss = 0.0;
    let mut labels = Vec::with_capacity(test.n_samples());
    let mut probs = Vec::with_capacity(test.n_samples());
    for i in 0..test.n_samples() {
        let y = test.target_row(i);
        let p = problem.model.predict(theta.as_slice(), &test.feature_row(i))?;
        loss += problem.loss.loss(&y, &p)?;
        labels.push(y[0]);
        probs.push(p[0]);
    }
    Ok(Some(EpochRecord {
        epoch: 0,
        test_loss: Some(loss / test.n_samples() as f64),
        test_accuracy: Some(binary_accuracy(&labels, &probs)?),
    }))
}

enum Stepper {
    Ggn(GgnScoreConfig),
    Sgd(f64),
    Adam(AdamState),
    Lbfgs(LbfgsState),
}

/// Runs the configured experiment from its prepared problem.
pub fn run_prepared(
    config: &ExperimentConfig,
    problem: &PreparedProblem,
) -> std::result::Result<RunLog, RunFailure> {
    let mut log = RunLog::default();
    match run_inner(config, problem, &mut log) {
        Ok(()) => Ok(log),
        Err(error) => Err(RunFailure {
            error,
            partial: log,
        }),
    }
}

/// Prepares and runs the experiment described by `config`.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<RunLog, RunFailure> {
    let problem = prepare(config).map_err(|e| RunFailure {
        error: e.into(),
        partial: RunLog::default(),
    })?;
    run_prepared(config, &problem)
}

fn run_inner(
    config: &ExperimentConfig,
    problem: &PreparedProblem,
    log: &mut RunLog,
) -> std::result::Result<(), ExperimentError> {
    let objective = problem.objective(config.lambda)?;
    let n = objective.n_samples();
    let n_w = objective.n_params();
    let full: Vec<usize> = objective.all_indices();
    let batch = match config.optimizer {
        OptimizerKind::Lbfgs => n,
        _ => config.batch_size.unwrap_or(n).min(n),
    };
    let mut sampler = BatchSampler::new(n, batch, config.seed.wrapping_add(1))?;
    let mut stepper = match config.optimizer {
        OptimizerKind::GgnScore => Stepper::Ggn(GgnScoreConfig {
            alpha: config.alpha,
            self_concordance: config.m_h,
            solver: config.solver,
            max_system_size: config.max_system_size,
        }),
        OptimizerKind::Sgd => Stepper::Sgd(config.lr),
        OptimizerKind::Adam => Stepper::Adam(AdamState::new(n_w, config.lr)?),
        OptimizerKind::Lbfgs => Stepper::Lbfgs(LbfgsState::new(config.lr, config.lbfgs_memory)?),
    };
    let start = Instant::now();
    let mut theta = problem.theta0.clone();
    let mut step = 0usize;
    for epoch in 1..=config.epochs {
        for idx in sampler.next_epoch() {
            step += 1;
            let (next, grad_norm, eta, rho) = match &mut stepper {
                Stepper::Ggn(cfg) => {
                    let system = assemble_augmented(&theta, &idx, &objective, cfg.max_system_size)?;
                    let (next, report) = ggn_score_step(&theta, &system, cfg)?;
                    if config.check_descent && config.is_convex() {
                        let delta = next.values() - theta.values();
                        if !descent_check(&system, &delta) {
                            return Err(ExperimentError::DescentViolation {
                                step,
                                inner: delta.dot(&system.gradient()),
                            });
                        }
                    }
                    (next, report.grad_norm, Some(report.eta), Some(report.rho))
                }
                Stepper::Sgd(lr) => {
                    let g = objective.gradient(theta.as_slice(), &idx)?;
                    (sgd_step(&theta, &g, *lr)?, g.norm(), None, None)
                }
                Stepper::Adam(state) => {
                    let g = objective.gradient(theta.as_slice(), &idx)?;
                    (state.step(&theta, &g)?, g.norm(), None, None)
                }
                Stepper::Lbfgs(state) => {
                    let g = objective.gradient(theta.as_slice(), &idx)?;
                    (state.step(&theta, &g)?, g.norm(), None, None)
                }
            };
            let step_norm = (next.values() - theta.values()).norm();
            theta = next;
            let train_loss = objective.value(theta.as_slice(), &full)?;
            if !train_loss.is_finite() {
                return Err(Error::Numeric(format!("training objective is {train_loss}")).into());
            }
            log.steps.push(StepRecord {
                epoch,
                step,
                train_loss,
                grad_norm,
                eta,
                rho,
                step_norm,
                wall_time_s: if config.record_wall_time {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            });
            if config.target_loss.is_some_and(|t| train_loss <= t) {
                break;
            }
        }
        if let Some(mut rec) = test_metrics(problem, &theta)? {
            rec.epoch = epoch;
            log.epochs.push(rec);
        }
        if config.target_loss.is_some_and(|t| log.final_train_loss().is_some_and(|l| l <= t)) {
            break;
        }
    }
    Ok(())
}

/// Runs a baseline once per learning rate and keeps the best run: the one
/// reaching `target_loss` in the fewest steps if any does, otherwise the
/// lowest final training objective. Diverging runs are discarded.
pub fn grid_search_lr(config: &ExperimentConfig, grid: &[f64]) -> Result<(f64, RunLog)> {
    let problem = prepare(config)?;
    let mut best: Option<(f64, RunLog)> = None;
    let score = |log: &RunLog| -> (usize, f64) {
        let reached = config
            .target_loss
            .and_then(|t| log.iterations_to(t))
            .unwrap_or(usize::MAX);
        (reached, log.final_train_loss().unwrap_or(f64::INFINITY))
    };
    for &lr in grid {
        let cfg = ExperimentConfig {
            lr,
            ..config.clone()
        };
        let Ok(log) = run_prepared(&cfg, &problem) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((_, b)) => {
                let (ra, la) = score(&log);
                let (rb, lb) = score(b);
                ra < rb || (ra == rb && la < lb)
            }
        };
        if better {
            best = Some((lr, log));
        }
    }
    best.ok_or_else(|| Error::Argument("every learning rate in the grid diverged".into()))
}

fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Writes the log as CSV. Per-epoch columns are filled only on the last
/// row of each epoch.
pub fn write_csv<W: Write>(log: &RunLog, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    for (i, s) in log.steps.iter().enumerate() {
        let last_of_epoch = log.steps.get(i + 1).is_none_or(|n| n.epoch != s.epoch);
        let ep = if last_of_epoch {
            log.epochs.iter().find(|e| e.epoch == s.epoch)
        } else {
            None
        };
        w.write_record([
            s.epoch.to_string(),
            s.step.to_string(),
            fmt_num(s.train_loss),
            fmt_num(s.grad_norm),
            fmt_opt(s.eta),
            fmt_opt(s.rho),
            fmt_num(s.step_norm),
            fmt_num(s.wall_time_s),
            fmt_opt(ep.and_then(|e| e.test_loss)),
            fmt_opt(ep.and_then(|e| e.test_accuracy)),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(log: &RunLog, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(log, std::io::BufWriter::new(file))
}

/// Parses a CSV produced by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<RunLog> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = r.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: "unexpected CSV header".into(),
        });
    }
    let mut log = RunLog::default();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k).parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad number {:?} in column {k}", field(k)),
            })
        };
        let opt = |k: usize| -> Result<Option<f64>> {
            if field(k).is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let int = |k: usize| -> Result<usize> {
            field(k).parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad integer {:?} in column {k}", field(k)),
            })
        };
        let epoch = int(0)?;
        log.steps.push(StepRecord {
            epoch,
            step: int(1)?,
            train_loss: num(2)?,
            grad_norm: num(3)?,
            eta: opt(4)?,
            rho: opt(5)?,
            step_norm: num(6)?,
            wall_time_s: num(7)?,
        });
        let (tl, ta) = (opt(8)?, opt(9)?);
        if tl.is_some() || ta.is_some() {
            log.epochs.push(EpochRecord {
                epoch,
                test_loss: tl,
                test_accuracy: ta,
            });
        }
    }
    Ok(log)
}

/// Full-batch gradient of the training objective at θ (handy for reports).
pub fn full_gradient(problem: &PreparedProblem, lambda: f64, theta: &ParameterVector) -> Result<DVector<f64>> {
    let obj = problem.objective(lambda)?;
    obj.gradient(theta.as_slice(), &obj.all_indices())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(binary_accuracy(&[1.0, 0.0], &[0.9, 0.1]).unwrap(), 1.0);
        assert_eq!(binary_accuracy(&[1.0, 0.0], &[0.1, 0.9]).unwrap(), 0.0);
        assert_eq!(binary_accuracy(&[1.0, 0.0, 1.0, 0.0], &[0.8, 0.2, 0.3, 0.7]).unwrap(), 0.5);
        assert!(binary_accuracy(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn empty_log_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&RunLog::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn one_step_is_two_lines() {
        let log = RunLog {
            steps: vec![StepRecord {
                epoch: 1,
                step: 1,
                train_loss: 0.5,
                grad_norm: 1.0,
                eta: Some(0.25),
                rho: Some(0.4),
                step_norm: 0.1,
                wall_time_s: 0.0,
            }],
            epochs: vec![EpochRecord {
                epoch: 1,
                test_loss: Some(0.3),
                test_accuracy: Some(1.0),
            }],
        };
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "1,1,5.00000000000e-1,1.00000000000e0,2.50000000000e-1,4.00000000000e-1,\
             1.00000000000e-1,0.00000000000e0,3.00000000000e-1,1.00000000000e0"
        );
        assert_eq!(read_csv(text.as_bytes()).unwrap(), log);
    }

    #[test]
    fn config_validation() {
        let bad = ExperimentConfig {
            lambda: 0.0,
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            split: 1.0,
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn epoch_losses_take_last_step() {
        let mk = |epoch, step, l| StepRecord {
            epoch,
            step,
            train_loss: l,
            grad_norm: 0.0,
            eta: None,
            rho: None,
            step_norm: 0.0,
            wall_time_s: 0.0,
        };
        let log = RunLog {
            steps: vec![mk(1, 1, 3.0), mk(1, 2, 2.0), mk(2, 3, 1.0)],
            epochs: vec![],
        };
        assert_eq!(log.epoch_train_losses(), vec![2.0, 1.0]);
        assert_eq!(log.iterations_to(2.0), Some(2));
        assert_eq!(log.iterations_to(0.5), None);
    }
}
