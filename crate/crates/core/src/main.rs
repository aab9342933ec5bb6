use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use ggn_score::experiment::{
    emit_csv, grid_search_lr, run_experiment, write_csv, ExperimentConfig, InitKind, OptimizerKind,
    ProblemKind, RegularizerKind, RunLog, LR_GRID,
};
use ggn_score::ggn::SolverKind;
use ggn_score::loss::ResidualMode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Problem {
    Quadratic,
    Classifier,
    Mlp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Optimizer {
    GgnScore,
    Sgd,
    Adam,
    Lbfgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Reg {
    PseudoHuber,
    L2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Solver {
    Identity,
    Direct,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Residual {
    Deviance,
    LossGradient,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Init {
    Default,
    Zero,
    Normal,
}

/// Train a model with GGN-SCORE or a baseline optimizer and write a CSV log.
#[derive(Debug, Parser)]
#[command(name = "ggn-score", version)]
struct Cli {
    #[arg(long, value_enum, default_value = "quadratic")]
    problem: Problem,
    /// LIBSVM or CSV/whitespace file; a synthetic two-cluster set is used when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Feature count for LIBSVM files (inferred when omitted).
    #[arg(long)]
    n_features: Option<usize>,
    /// Variables of the synthetic quadratic.
    #[arg(long, default_value_t = 200)]
    n_w: usize,
    /// Rows of the synthetic quadratic or samples of the synthetic classifier set.
    #[arg(long, default_value_t = 200)]
    n_samples: usize,
    /// Scale s in Q = s·MᵀM.
    #[arg(long, default_value_t = 0.1)]
    scale: f64,
    #[arg(long, value_enum, default_value = "ggn-score")]
    optimizer: Optimizer,
    #[arg(long, value_enum, default_value = "pseudo-huber")]
    regularizer: Reg,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Self-concordance parameter of the regularizer.
    #[arg(long, default_value_t = 1.0)]
    mh: f64,
    /// Mini-batch size (full batch when omitted).
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Learning rate for the baselines; `--lr-grid` searches the default grid instead.
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[arg(long)]
    lr_grid: bool,
    #[arg(long, default_value_t = 10)]
    lbfgs_memory: usize,
    /// RBF kernel width.
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Fraction of samples used for training.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    landmark_cap: usize,
    #[arg(long, value_enum, default_value = "identity")]
    solver: Solver,
    #[arg(long, default_value_t = 8192)]
    max_system_size: usize,
    /// Hidden layer widths of the MLP.
    #[arg(long, value_delimiter = ',', default_value = "4,16")]
    hidden: Vec<usize>,
    #[arg(long, value_enum, default_value = "deviance")]
    residual: Residual,
    #[arg(long)]
    standardize: bool,
    #[arg(long, value_enum, default_value = "default")]
    init: Init,
    #[arg(long, default_value_t = 0.01)]
    init_std: f64,
    /// Stop once the training objective reaches this value.
    #[arg(long)]
    target_loss: Option<f64>,
    /// Write 0 in the wall-time column (makes repeated runs byte-identical).
    #[arg(long)]
    no_timing: bool,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            problem: match self.problem {
                Problem::Quadratic => ProblemKind::Quadratic,
                Problem::Classifier => ProblemKind::Classifier,
                Problem::Mlp => ProblemKind::Mlp,
            },
            data: self.data.clone(),
            n_features: self.n_features,
            n_w: self.n_w,
            n_samples: self.n_samples,
            scale: self.scale,
            optimizer: match self.optimizer {
                Optimizer::GgnScore => OptimizerKind::GgnScore,
                Optimizer::Sgd => OptimizerKind::Sgd,
                Optimizer::Adam => OptimizerKind::Adam,
                Optimizer::Lbfgs => OptimizerKind::Lbfgs,
            },
            regularizer: match self.regularizer {
                Reg::PseudoHuber => RegularizerKind::PseudoHuber,
                Reg::L2 => RegularizerKind::L2,
            },
            lambda: self.lambda,
            alpha: self.alpha,
            mu: self.mu,
            m_h: self.mh,
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr: self.lr,
            lbfgs_memory: self.lbfgs_memory,
            gamma: self.gamma,
            split: self.split,
            seed: self.seed,
            landmark_cap: Some(self.landmark_cap),
            solver: match self.solver {
                Solver::Identity => SolverKind::Identity,
                Solver::Direct => SolverKind::Direct,
            },
            max_system_size: self.max_system_size,
            hidden: self.hidden.clone(),
            residual_mode: match self.residual {
                Residual::Deviance => ResidualMode::Deviance,
                Residual::LossGradient => ResidualMode::LossGradient,
            },
            standardize: self.standardize,
            init: match self.init {
                Init::Default => InitKind::Default,
                Init::Zero => InitKind::Zero,
                Init::Normal => InitKind::Normal(self.init_std),
            },
            target_loss: self.target_loss,
            record_wall_time: !self.no_timing,
            check_descent: true,
        }
    }
}

fn write_log(log: &RunLog, out: Option<&PathBuf>) -> ggn_score::Result<()> {
    match out {
        Some(path) => emit_csv(log, path),
        None => write_csv(log, std::io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli.config();
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let log = if cli.lr_grid && config.optimizer != OptimizerKind::GgnScore {
        match grid_search_lr(&config, &LR_GRID) {
            Ok((lr, log)) => {
                eprintln!("best learning rate: {lr}");
                log
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        }
    } else {
        match run_experiment(&config) {
            Ok(log) => log,
            Err(failure) => {
                if let Err(e) = write_log(&failure.partial, cli.out.as_ref()) {
                    eprintln!("error: could not write partial log: {e}");
                }
                eprintln!("error: {failure}");
                return ExitCode::FAILURE;
            }
        }
    };
    if let Err(e) = write_log(&log, cli.out.as_ref()) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    if let Some(last) = log.steps.last() {
        eprintln!(
            "{} steps, final train loss {:.6e}, grad norm {:.3e}",
            last.step, last.train_loss, last.grad_norm
        );
    }
    if let Some(ep) = log.epochs.last() {
        if let (Some(l), Some(a)) = (ep.test_loss, ep.test_accuracy) {
            eprintln!("test loss {l:.6e}, test accuracy {a:.4}");
        }
    }
    ExitCode::SUCCESS
}
