//! The ADMM iteration unrolled into a fixed number of stages whose
//! regularization, penalty and step parameters are learned from the data.
//!
//! Each stage is exactly one [`admm::iterate`](crate::admm::iterate) call with
//! that stage's realized parameters, so an untrained tied model with the
//! solver defaults reproduces the fixed-parameter solver bit for bit.

mod train;

pub use train::{stage_sweep, train, SweepRow, TrainConfig, TrainOutcome};

use alloc::format;
use alloc::vec::Vec;

use crate::admm::{self, GradientMode, Problem, SolverState, StepParams};
use crate::error::{check_non_negative, Error, Result};
use crate::float::{exp, ln};
use crate::linalg::{objective, Matrix};

/// Per-stage parameters in log space; the realized value of each is `exp(·)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageParams {
    pub log_lambda: f64,
    pub log_mu: f64,
    pub log_alpha: f64,
    pub log_beta: f64,
    pub log_eta: f64,
}

impl StageParams {
    pub const LEN: usize = 5;

    pub fn from_realized(lambda: f64, mu: f64, alpha: f64, beta: f64, eta: f64) -> Result<Self> {
        for (name, v) in [
            ("lambda", lambda),
            ("mu", mu),
            ("alpha", alpha),
            ("beta", beta),
            ("eta", eta),
        ] {
            crate::error::check_positive("StageParams::from_realized", name, v)?;
        }
        Ok(Self {
            log_lambda: ln(lambda),
            log_mu: ln(mu),
            log_alpha: ln(alpha),
            log_beta: ln(beta),
            log_eta: ln(eta),
        })
    }

    /// The solver defaults for `problem`.
    pub fn defaults_for(problem: &Problem) -> Self {
        let p = admm::SolverParams::defaults_for(problem);
        Self::from_realized(p.lambda, p.mu, p.alpha, p.beta, p.eta)
            .expect("solver defaults are positive")
    }

    /// Exponentiates every parameter; fails if any realized value is not a
    /// finite positive number (overflow to ∞ or underflow to 0).
    pub fn realize(&self, gradient_mode: GradientMode) -> Result<StepParams> {
        let mut out = [0.0; Self::LEN];
        let names = ["lambda", "mu", "alpha", "beta", "eta"];
        for ((o, v), name) in out.iter_mut().zip(self.to_array()).zip(names) {
            *o = exp(v);
            crate::error::check_positive("StageParams::realize", name, *o)?;
        }
        let [lambda, mu, alpha, beta, eta] = out;
        Ok(StepParams {
            lambda,
            mu,
            alpha,
            beta,
            eta,
            gradient_mode,
        })
    }

    pub fn to_array(&self) -> [f64; Self::LEN] {
        [
            self.log_lambda,
            self.log_mu,
            self.log_alpha,
            self.log_beta,
            self.log_eta,
        ]
    }

    pub fn from_array(v: [f64; Self::LEN]) -> Self {
        let [log_lambda, log_mu, log_alpha, log_beta, log_eta] = v;
        Self {
            log_lambda,
            log_mu,
            log_alpha,
            log_beta,
            log_eta,
        }
    }
}

/// Whether stages share one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tying {
    /// Independent parameters per stage.
    #[default]
    Untied,
    /// One parameter set reused by every stage.
    Tied,
}

/// Learned mixing applied to the SVD factors of the X-step.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixing {
    /// d×d, multiplies U.
    pub w_u: Matrix,
    /// m×m, multiplies V.
    pub w_v: Matrix,
}

impl Mixing {
    pub fn identity(d: usize, m: usize) -> Self {
        Self {
            w_u: Matrix::identity(d),
            w_v: Matrix::identity(m),
        }
    }
}

/// Architecture and loss settings used to build a fresh model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub depth: usize,
    pub tying: Tying,
    pub larg_linear: bool,
    pub loss_lambda: f64,
    pub loss_mu: f64,
    pub gradient_mode: GradientMode,
}

pub const DEFAULT_DEPTH: usize = 5;
pub const DEFAULT_LOSS_LAMBDA: f64 = 0.1;
pub const DEFAULT_LOSS_MU: f64 = 0.1;

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            depth: DEFAULT_DEPTH,
            tying: Tying::Untied,
            larg_linear: false,
            loss_lambda: DEFAULT_LOSS_LAMBDA,
            loss_mu: DEFAULT_LOSS_MU,
            gradient_mode: GradientMode::Exact,
        }
    }
}

/// A `depth`-stage unrolled solver.
///
/// In tied mode `stages` (and `mixing`) hold a single entry shared by every
/// stage; in untied mode they hold one entry per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedModel {
    depth: usize,
    tying: Tying,
    stages: Vec<StageParams>,
    mixing: Option<Vec<Mixing>>,
    /// Fixed weight of `‖X̄‖_{2,1}` in the training loss.
    pub loss_lambda: f64,
    /// Fixed weight of `‖X̄‖₁` in the training loss.
    pub loss_mu: f64,
    pub gradient_mode: GradientMode,
}

impl UnfoldedModel {
    /// Untrained model whose every stage uses the solver defaults for
    /// `problem`, with identity mixing when `larg_linear` is set.
    pub fn new(problem: &Problem, config: &ModelConfig) -> Result<Self> {
        let slots = match config.tying {
            Tying::Tied => 1,
            Tying::Untied => config.depth,
        };
        let stage = StageParams::defaults_for(problem);
        let mixing = config.larg_linear.then(|| {
            (0..slots)
                .map(|_| Mixing::identity(problem.features(), problem.components()))
                .collect()
        });
        Self::from_parts(
            config.depth,
            config.tying,
            alloc::vec![stage; slots],
            mixing,
            config.loss_lambda,
            config.loss_mu,
            config.gradient_mode,
        )
    }

    /// Tied model that repeats `stage` `depth` times.
    pub fn tied(depth: usize, stage: StageParams, loss_lambda: f64, loss_mu: f64) -> Result<Self> {
        Self::from_parts(
            depth,
            Tying::Tied,
            alloc::vec![stage],
            None,
            loss_lambda,
            loss_mu,
            GradientMode::Exact,
        )
    }

    pub fn from_parts(
        depth: usize,
        tying: Tying,
        stages: Vec<StageParams>,
        mixing: Option<Vec<Mixing>>,
        loss_lambda: f64,
        loss_mu: f64,
        gradient_mode: GradientMode,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::OutOfRange {
                op: "UnfoldedModel",
                what: "depth",
                value: 0,
                min: 1,
                max: usize::MAX,
            });
        }
        let slots = match tying {
            Tying::Tied => 1,
            Tying::Untied => depth,
        };
        if stages.len() != slots {
            return Err(Error::Invalid(format!(
                "{tying:?} model of depth {depth} needs {slots} stage parameter sets, got {}",
                stages.len()
            )));
        }
        if let Some(mix) = &mixing {
            if mix.len() != slots {
                return Err(Error::Invalid(format!(
                    "{tying:?} model of depth {depth} needs {slots} mixing pairs, got {}",
                    mix.len()
                )));
            }
            for w in mix {
                if w.w_u.rows() != w.w_u.cols() || w.w_v.rows() != w.w_v.cols() {
                    return Err(Error::Invalid("mixing matrices must be square".into()));
                }
            }
        }
        check_non_negative("UnfoldedModel", "loss_lambda", loss_lambda)?;
        check_non_negative("UnfoldedModel", "loss_mu", loss_mu)?;
        Ok(Self {
            depth,
            tying,
            stages,
            mixing,
            loss_lambda,
            loss_mu,
            gradient_mode,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn tying(&self) -> Tying {
        self.tying
    }

    pub fn larg_linear(&self) -> bool {
        self.mixing.is_some()
    }

    /// Stored parameter sets (one when tied).
    pub fn stages(&self) -> &[StageParams] {
        &self.stages
    }

    pub fn mixing(&self) -> Option<&[Mixing]> {
        self.mixing.as_deref()
    }

    fn slot(&self, stage: usize) -> usize {
        match self.tying {
            Tying::Tied => 0,
            Tying::Untied => stage,
        }
    }

    /// Parameters used by stage `k` (0-based).
    pub fn stage(&self, k: usize) -> &StageParams {
        &self.stages[self.slot(k)]
    }

    /// Same model with every stage owning a copy of its parameters.
    pub fn untied(&self) -> Self {
        let expand = |k| self.slot(k);
        Self {
            depth: self.depth,
            tying: Tying::Untied,
            stages: (0..self.depth).map(|k| self.stages[expand(k)]).collect(),
            mixing: self
                .mixing
                .as_ref()
                .map(|m| (0..self.depth).map(|k| m[expand(k)].clone()).collect()),
            loss_lambda: self.loss_lambda,
            loss_mu: self.loss_mu,
            gradient_mode: self.gradient_mode,
        }
    }

    /// Flattened trainable parameters: per slot the five log-parameters,
    /// followed by all mixing entries when present.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.stages.iter().flat_map(|s| s.to_array()).collect();
        if let Some(mix) = &self.mixing {
            for w in mix {
                out.extend_from_slice(w.w_u.as_slice());
                out.extend_from_slice(w.w_v.as_slice());
            }
        }
        out
    }

    /// Inverse of [`parameters`](Self::parameters).
    pub fn set_parameters(&mut self, theta: &[f64]) {
        assert_eq!(
            theta.len(),
            self.parameter_count(),
            "parameter vector length"
        );
        let mut it = theta.iter().copied();
        for s in &mut self.stages {
            let mut a = [0.0; StageParams::LEN];
            a.iter_mut().for_each(|v| *v = it.next().unwrap());
            *s = StageParams::from_array(a);
        }
        if let Some(mix) = &mut self.mixing {
            for w in mix {
                w.w_u
                    .as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = it.next().unwrap());
                w.w_v
                    .as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = it.next().unwrap());
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        let mix: usize = self.mixing.as_ref().map_or(0, |m| {
            m.iter()
                .map(|w| w.w_u.as_slice().len() + w.w_v.as_slice().len())
                .sum()
        });
        self.stages.len() * StageParams::LEN + mix
    }

    fn check_problem(&self, problem: &Problem) -> Result<()> {
        if let Some(mix) = &self.mixing {
            let (d, m) = (problem.features(), problem.components());
            for w in mix {
                if w.w_u.rows() != d || w.w_v.rows() != m {
                    return Err(Error::DimensionMismatch {
                        op: "forward",
                        expected: format!("mixing {d}x{d} and {m}x{m}"),
                        found: format!(
                            "{}x{} and {}x{}",
                            w.w_u.rows(),
                            w.w_u.cols(),
                            w.w_v.rows(),
                            w.w_v.cols()
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Snapshot of one stage's output.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub x: Matrix,
    pub y: Matrix,
    pub z: Matrix,
    pub primal_residual_y: f64,
    pub primal_residual_z: f64,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// State after the last stage; `state.x` is the network output X̄.
    pub state: SolverState,
    pub trace: Vec<StageTrace>,
}

impl ForwardPass {
    pub fn projection(&self) -> &Matrix {
        &self.state.x
    }
}

/// Runs the `depth` stages from the solver's deterministic start point.
pub fn forward(model: &UnfoldedModel, problem: &Problem) -> Result<ForwardPass> {
    run(model, problem, true)
}

pub(crate) fn run(model: &UnfoldedModel, problem: &Problem, record: bool) -> Result<ForwardPass> {
    model.check_problem(problem)?;
    let mut state = admm::init_state(problem);
    let mut trace = Vec::with_capacity(if record { model.depth } else { 0 });
    for k in 0..model.depth {
        let slot = model.slot(k);
        let step = model.stages[slot].realize(model.gradient_mode)?;
        let mixing = model.mixing.as_ref().map(|m| (&m[slot].w_u, &m[slot].w_v));
        admm::iterate_mixed(problem, &mut state, &step, mixing)?;
        if record {
            trace.push(StageTrace {
                x: state.x.clone(),
                y: state.y.clone(),
                z: state.z.clone(),
                primal_residual_y: state.primal_residual_y,
                primal_residual_z: state.primal_residual_z,
            });
        }
    }
    Ok(ForwardPass { state, trace })
}

/// `½‖A − X̄X̄ᵀA‖²_F + loss_lambda·‖X̄‖_{2,1} + loss_mu·‖X̄‖₁` with the model's
/// fixed loss weights.
pub fn loss(model: &UnfoldedModel, a: &Matrix, x_bar: &Matrix) -> Result<f64> {
    objective(a, x_bar, model.loss_lambda, model.loss_mu)
}

/// Loss of the model's own output on `problem`.
pub fn evaluate_loss(model: &UnfoldedModel, problem: &Problem) -> Result<f64> {
    let pass = run(model, problem, false)?;
    loss(model, problem.data(), pass.projection())
}
