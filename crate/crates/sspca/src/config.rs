//! Run configuration, read from and written to JSON.
//!
//! Every field has a default, so a minimal document only names the data:
//!
//! ```json
//! { "data_path": "data.csv", "labels_path": "labels.txt", "mode": "spcanet" }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};
use sspca_core::admm::{self, GradientMode};
use sspca_core::ufs;
use sspca_core::unfolding::{self, ModelConfig, TrainConfig, Tying};

/// Default output directory when neither the config nor the command line
/// names one and `SSPCA_OUTPUT_DIR` is unset.
pub const DEFAULT_OUTPUT_DIR: &str = "sspca-out";
pub const OUTPUT_DIR_ENV: &str = "SSPCA_OUTPUT_DIR";
/// Components used when `m = 0` and no labels are available.
pub const FALLBACK_COMPONENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Fixed-parameter ADMM.
    #[default]
    Admm,
    /// Train the unfolded network, then run it.
    Spcanet,
    /// ADMM over a (λ, μ) grid, keeping the pair with the lowest loss.
    Gridsearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GradientChoice {
    #[default]
    Exact,
    Literal,
}

impl From<GradientChoice> for GradientMode {
    fn from(g: GradientChoice) -> Self {
        match g {
            GradientChoice::Exact => GradientMode::Exact,
            GradientChoice::Literal => GradientMode::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TyingChoice {
    #[default]
    Untied,
    Tied,
}

impl From<TyingChoice> for Tying {
    fn from(t: TyingChoice) -> Self {
        match t {
            TyingChoice::Untied => Tying::Untied,
            TyingChoice::Tied => Tying::Tied,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `None` means `1/(2‖A‖₂² + α + β)`.
    pub eta: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
    pub gradient_mode: GradientChoice,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            lambda: admm::DEFAULT_LAMBDA,
            mu: admm::DEFAULT_MU,
            alpha: admm::DEFAULT_ALPHA,
            beta: admm::DEFAULT_BETA,
            eta: None,
            max_iters: admm::DEFAULT_MAX_ITERS,
            tol: admm::DEFAULT_TOL,
            gradient_mode: GradientChoice::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub depth: usize,
    pub tying: TyingChoice,
    pub larg_linear: bool,
    pub loss_lambda: f64,
    pub loss_mu: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            depth: unfolding::DEFAULT_DEPTH,
            tying: TyingChoice::Untied,
            larg_linear: false,
            loss_lambda: unfolding::DEFAULT_LOSS_LAMBDA,
            loss_mu: unfolding::DEFAULT_LOSS_MU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub iterations: usize,
    pub spsa_a: f64,
    pub spsa_c: f64,
    pub spsa_big_a: f64,
    pub calibrate_gain: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            iterations: t.iterations,
            spsa_a: t.spsa_a,
            spsa_c: t.spsa_c,
            spsa_big_a: t.spsa_big_a,
            calibrate_gain: t.calibrate_gain,
        }
    }
}

/// Candidate values for the grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
}

/// `10⁻³, 10⁻², …, 10¹`.
pub fn default_grid_axis() -> Vec<f64> {
    vec![1e-3, 1e-2, 1e-1, 1.0, 1e1]
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            lambdas: default_grid_axis(),
            mus: default_grid_axis(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// features × samples matrix (`.csv` or `.bin`).
    pub data_path: PathBuf,
    pub labels_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Projection columns; 0 picks the number of label categories, or 10
    /// without labels.
    pub m: usize,
    /// Subtract each feature's mean before anything else.
    pub center: bool,
    pub mode: Mode,
    pub solver: SolverSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub grid: GridSection,
    pub feature_counts: Vec<usize>,
    pub repeats: usize,
    /// Seeds training and the k-means repeats.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_path: PathBuf::new(),
            labels_path: None,
            output_dir: None,
            m: 0,
            center: true,
            mode: Mode::Admm,
            solver: SolverSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            grid: GridSection::default(),
            feature_counts: ufs::default_feature_counts(),
            repeats: ufs::DEFAULT_REPEATS,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Output directory, or an error if none was resolved.
    pub fn output_dir(&self) -> anyhow::Result<&Path> {
        match &self.output_dir {
            Some(p) if !p.as_os_str().is_empty() => Ok(p),
            _ => bail!("output_dir is not set"),
        }
    }

    /// Fills `output_dir` from `SSPCA_OUTPUT_DIR` or the built-in default when
    /// it is unset.
    pub fn with_default_output_dir(mut self) -> Self {
        if self.output_dir.is_none() {
            let dir = std::env::var_os(OUTPUT_DIR_ENV).unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into());
            self.output_dir = Some(dir.into());
        }
        self
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(
            !self.data_path.as_os_str().is_empty(),
            "data_path is required"
        );
        if let Some(l) = &self.labels_path {
            ensure!(!l.as_os_str().is_empty(), "labels_path must not be empty");
        }
        let s = &self.solver;
        for (name, v) in [
            ("solver.lambda", s.lambda),
            ("solver.mu", s.mu),
            ("solver.tol", s.tol),
        ] {
            ensure!(
                v.is_finite() && v >= 0.0,
                "{name} must be finite and >= 0, got {v}"
            );
        }
        for (name, v) in [("solver.alpha", s.alpha), ("solver.beta", s.beta)] {
            ensure!(
                v.is_finite() && v > 0.0,
                "{name} must be finite and > 0, got {v}"
            );
        }
        if let Some(eta) = s.eta {
            ensure!(
                eta.is_finite() && eta > 0.0,
                "solver.eta must be finite and > 0, got {eta}"
            );
        }
        ensure!(s.max_iters > 0, "solver.max_iters must be > 0");
        ensure!(self.model.depth > 0, "model.depth must be > 0");
        for (name, v) in [
            ("model.loss_lambda", self.model.loss_lambda),
            ("model.loss_mu", self.model.loss_mu),
        ] {
            ensure!(
                v.is_finite() && v >= 0.0,
                "{name} must be finite and >= 0, got {v}"
            );
        }
        self.train_config().validate()?;
        for (name, axis) in [
            ("grid.lambdas", &self.grid.lambdas),
            ("grid.mus", &self.grid.mus),
        ] {
            ensure!(!axis.is_empty(), "{name} must not be empty");
            ensure!(
                axis.iter().all(|v| v.is_finite() && *v >= 0.0),
                "{name} entries must be finite and >= 0"
            );
        }
        ensure!(
            !self.feature_counts.is_empty(),
            "feature_counts must not be empty"
        );
        ensure!(
            self.feature_counts.iter().all(|&h| h > 0),
            "feature_counts entries must be > 0"
        );
        ensure!(self.repeats > 0, "repeats must be > 0");
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            depth: self.model.depth,
            tying: self.model.tying.into(),
            larg_linear: self.model.larg_linear,
            loss_lambda: self.model.loss_lambda,
            loss_mu: self.model.loss_mu,
            gradient_mode: self.solver.gradient_mode.into(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.train.iterations,
            spsa_a: self.train.spsa_a,
            spsa_c: self.train.spsa_c,
            spsa_big_a: self.train.spsa_big_a,
            calibrate_gain: self.train.calibrate_gain,
            seed: self.seed,
        }
    }
}
