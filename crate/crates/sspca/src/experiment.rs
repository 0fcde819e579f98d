//! In-memory pipelines behind the commands: everything here takes loaded
//! data and returns results without touching the file system.

use anyhow::{ensure, Context};
use sspca_core::admm::{self, Problem, SolverParams};
use sspca_core::linalg::objective;
use sspca_core::ufs::{self, EvalReport, LabelVector};
use sspca_core::unfolding::{self, Mixing, StageParams, Tying, UnfoldedModel};
use sspca_core::Matrix;

use crate::config::{Mode, RunConfig, FALLBACK_COMPONENTS};

/// One row of a loss/residual history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub objective: f64,
    pub primal_residual_y: f64,
    pub primal_residual_z: f64,
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub lambda: f64,
    pub mu: f64,
    /// Objective of the solver output under the model's loss weights.
    pub loss: f64,
}

/// Everything `run` produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub projection: Matrix,
    pub history: Vec<HistoryRow>,
    /// Trained (or untrained) network in `spcanet` mode.
    pub model: Option<UnfoldedModel>,
    /// Training loss per SPSA step in `spcanet` mode.
    pub train_history: Option<Vec<f64>>,
    /// All grid points in `gridsearch` mode.
    pub grid: Option<Vec<GridPoint>>,
    pub eval: Option<EvalReport>,
    /// The configuration with `m` and `eta` resolved.
    pub effective: RunConfig,
}

/// Subtracts each row's mean when `center` is set.
pub fn prepare(data: Matrix, center: bool) -> Matrix {
    if center {
        data.center_rows()
    } else {
        data
    }
}

pub fn resolve_components(m: usize, labels: Option<&LabelVector>) -> usize {
    match (m, labels) {
        (0, Some(l)) => l.categories(),
        (0, None) => FALLBACK_COMPONENTS,
        (m, _) => m,
    }
}

/// Builds the problem and fills `m` and `eta` in a copy of `cfg`.
pub fn setup(
    cfg: &RunConfig,
    data: Matrix,
    labels: Option<&LabelVector>,
) -> anyhow::Result<(Problem, RunConfig)> {
    cfg.validate()?;
    if let Some(l) = labels {
        ensure!(
            l.len() == data.cols(),
            "{} labels for {} samples (data is features x samples)",
            l.len(),
            data.cols()
        );
    }
    let mut effective = cfg.clone();
    effective.m = resolve_components(cfg.m, labels);
    let problem =
        Problem::new(prepare(data, cfg.center), effective.m).context("setting up the problem")?;
    if effective.solver.eta.is_none() {
        effective.solver.eta = Some(admm::default_eta(
            problem.spectral_norm(),
            effective.solver.alpha,
            effective.solver.beta,
        ));
    }
    Ok((problem, effective))
}

/// Positive step parameters are passed through the network's log
/// parameterization, so a solver run and an untrained network built from the
/// same configuration use the same bits.
fn canonical(mut p: SolverParams) -> SolverParams {
    if let Ok(stage) = StageParams::from_realized(p.lambda, p.mu, p.alpha, p.beta, p.eta) {
        let s = stage
            .realize(p.gradient_mode)
            .expect("round trip of positive values");
        (p.lambda, p.mu, p.alpha, p.beta, p.eta) = (s.lambda, s.mu, s.alpha, s.beta, s.eta);
    }
    p
}

/// Solver parameters of a resolved configuration, as written in it.
pub fn solver_params(effective: &RunConfig) -> SolverParams {
    let s = &effective.solver;
    SolverParams {
        lambda: s.lambda,
        mu: s.mu,
        alpha: s.alpha,
        beta: s.beta,
        eta: s.eta.expect("eta resolved by setup"),
        max_iters: s.max_iters,
        tol: s.tol,
        gradient_mode: s.gradient_mode.into(),
    }
}

/// Untrained network whose every stage uses the configured solver
/// parameters.
pub fn initial_model(
    effective: &RunConfig,
    problem: &Problem,
    tying: Tying,
    stage: StageParams,
) -> anyhow::Result<UnfoldedModel> {
    let mc = effective.model_config();
    let slots = if tying == Tying::Tied { 1 } else { mc.depth };
    let mixing = mc.larg_linear.then(|| {
        (0..slots)
            .map(|_| Mixing::identity(problem.features(), problem.components()))
            .collect()
    });
    Ok(UnfoldedModel::from_parts(
        mc.depth,
        tying,
        vec![stage; slots],
        mixing,
        mc.loss_lambda,
        mc.loss_mu,
        mc.gradient_mode,
    )?)
}

fn configured_stage(effective: &RunConfig) -> anyhow::Result<StageParams> {
    let p = solver_params(effective);
    StageParams::from_realized(p.lambda, p.mu, p.alpha, p.beta, p.eta)
        .context("the network needs strictly positive lambda, mu, alpha, beta and eta")
}

fn history_of(solution: &admm::Solution) -> Vec<HistoryRow> {
    solution
        .history
        .iter()
        .map(|r| HistoryRow {
            iter: r.iter,
            objective: r.objective,
            primal_residual_y: r.primal_residual_y,
            primal_residual_z: r.primal_residual_z,
        })
        .collect()
}

/// Runs the network and records, per stage, the objective under that
/// stage's own λ and μ.
pub fn forward_history(
    model: &UnfoldedModel,
    problem: &Problem,
) -> anyhow::Result<(Matrix, Vec<HistoryRow>)> {
    let pass = unfolding::forward(model, problem)?;
    let mut rows = Vec::with_capacity(pass.trace.len());
    for (k, t) in pass.trace.iter().enumerate() {
        let step = model.stage(k).realize(model.gradient_mode)?;
        rows.push(HistoryRow {
            iter: k + 1,
            objective: objective(problem.data(), &t.x, step.lambda, step.mu)?,
            primal_residual_y: t.primal_residual_y,
            primal_residual_z: t.primal_residual_z,
        });
    }
    Ok((pass.state.x, rows))
}

/// Solves once per `(λ, μ)` pair in row-major grid order and returns every
/// point plus the index of the lowest loss (first on ties) and its solution.
/// The other parameters come from `base`.
pub fn grid_search(
    problem: &Problem,
    base: &SolverParams,
    lambdas: &[f64],
    mus: &[f64],
    loss_lambda: f64,
    loss_mu: f64,
) -> anyhow::Result<(Vec<GridPoint>, usize, admm::Solution)> {
    let mut points = Vec::with_capacity(lambdas.len() * mus.len());
    let mut best: Option<(usize, admm::Solution)> = None;
    for &lambda in lambdas {
        for &mu in mus {
            let params = canonical(SolverParams {
                lambda,
                mu,
                ..*base
            });
            let sol = admm::solve(problem, &params)
                .with_context(|| format!("grid point lambda={lambda}, mu={mu}"))?;
            let loss = objective(problem.data(), sol.projection(), loss_lambda, loss_mu)?;
            points.push(GridPoint { lambda, mu, loss });
            if best.as_ref().is_none_or(|(i, _)| loss < points[*i].loss) {
                best = Some((points.len() - 1, sol));
            }
        }
    }
    let (idx, sol) = best.expect("grid is non-empty");
    Ok((points, idx, sol))
}

fn evaluate_if(
    effective: &RunConfig,
    problem: &Problem,
    labels: Option<&LabelVector>,
    x: &Matrix,
) -> anyhow::Result<Option<EvalReport>> {
    let Some(labels) = labels else {
        return Ok(None);
    };
    let report = ufs::evaluate(
        problem.data(),
        labels,
        x,
        &effective.feature_counts,
        effective.repeats,
        effective.seed,
    )
    .context("evaluating feature selection")?;
    Ok(Some(report))
}

/// Loads nothing, writes nothing: solve, train or grid-search according to
/// `cfg.mode` and evaluate when labels are given.
pub fn run(
    cfg: &RunConfig,
    data: Matrix,
    labels: Option<&LabelVector>,
) -> anyhow::Result<RunOutput> {
    let (problem, effective) = setup(cfg, data, labels)?;
    let params = solver_params(&effective);
    let mut out = RunOutput {
        projection: Matrix::zeros(1, 1),
        history: Vec::new(),
        model: None,
        train_history: None,
        grid: None,
        eval: None,
        effective: effective.clone(),
    };
    match effective.mode {
        Mode::Admm => {
            let sol = admm::solve(&problem, &canonical(params)).context("running the solver")?;
            out.history = history_of(&sol);
            out.projection = sol.state.x;
        }
        Mode::Spcanet => {
            let model = initial_model(
                &effective,
                &problem,
                effective.model.tying.into(),
                configured_stage(&effective)?,
            )?;
            let trained = unfolding::train(&model, &problem, &effective.train_config())
                .context("training")?;
            let (x, history) = forward_history(&trained.model, &problem)?;
            out.projection = x;
            out.history = history;
            out.model = Some(trained.model);
            out.train_history = Some(trained.history);
        }
        Mode::Gridsearch => {
            let (points, _, sol) = grid_search(
                &problem,
                &params,
                &effective.grid.lambdas,
                &effective.grid.mus,
                effective.model.loss_lambda,
                effective.model.loss_mu,
            )?;
            out.history = history_of(&sol);
            out.projection = sol.state.x;
            out.grid = Some(points);
        }
    }
    out.eval = evaluate_if(&effective, &problem, labels, &out.projection)?;
    Ok(out)
}

/// One configuration of the ablation study.
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub configuration: &'static str,
    pub loss: f64,
    pub projection: Matrix,
    pub eval: Option<EvalReport>,
}

pub const ABLATION_CONFIGURATIONS: [&str; 4] = ["gridsearch", "untrained", "tied", "untied"];

/// Compares four ways of choosing the parameters of a `model.depth`-step
/// iteration, all scored by the network loss:
///
/// * `gridsearch`: one (λ, μ) pair from the grid, run for exactly `depth`
///   iterations.
/// * `untrained`: the configured solver parameters at every stage.
/// * `tied`: one shared parameter set trained from the grid winner.
/// * `untied`: per-stage parameters trained from the tied result.
///
/// Each trained configuration starts from the previous one and training
/// never returns a worse model than its start, so the losses are
/// non-increasing from `gridsearch` through `tied` to `untied`.
pub fn ablate(
    cfg: &RunConfig,
    data: Matrix,
    labels: Option<&LabelVector>,
) -> anyhow::Result<(Vec<AblationRow>, RunConfig)> {
    let (problem, effective) = setup(cfg, data, labels)?;
    let depth = effective.model.depth;
    let mc = effective.model_config();
    let train_cfg = effective.train_config();
    let budget = SolverParams {
        max_iters: depth,
        tol: 0.0,
        ..solver_params(&effective)
    };
    let (points, best, grid_sol) = grid_search(
        &problem,
        &budget,
        &effective.grid.lambdas,
        &effective.grid.mus,
        mc.loss_lambda,
        mc.loss_mu,
    )?;
    let mut rows = vec![AblationRow {
        configuration: ABLATION_CONFIGURATIONS[0],
        loss: points[best].loss,
        projection: grid_sol.state.x,
        eval: None,
    }];

    let mut push_model = |name, model: &UnfoldedModel| -> anyhow::Result<()> {
        let pass = unfolding::forward(model, &problem)?;
        rows.push(AblationRow {
            configuration: name,
            loss: unfolding::loss(model, problem.data(), pass.projection())?,
            projection: pass.state.x,
            eval: None,
        });
        Ok(())
    };

    let untrained = initial_model(
        &effective,
        &problem,
        Tying::Untied,
        configured_stage(&effective)?,
    )?;
    push_model(ABLATION_CONFIGURATIONS[1], &untrained)?;

    let winner = StageParams::from_realized(
        points[best].lambda,
        points[best].mu,
        budget.alpha,
        budget.beta,
        budget.eta,
    )
    .context("grid-search start for the tied network needs lambda, mu > 0")?;
    let tied_start = initial_model(&effective, &problem, Tying::Tied, winner)?;
    let tied =
        unfolding::train(&tied_start, &problem, &train_cfg).context("training the tied network")?;
    push_model(ABLATION_CONFIGURATIONS[2], &tied.model)?;

    let untied = unfolding::train(&tied.model.untied(), &problem, &train_cfg)
        .context("training the untied network")?;
    push_model(ABLATION_CONFIGURATIONS[3], &untied.model)?;

    for row in &mut rows {
        row.eval = evaluate_if(&effective, &problem, labels, &row.projection)?;
    }
    Ok((rows, effective))
}

/// Trains a fresh network for every depth `1..=max_depth`, each starting
/// from the configured solver parameters.
pub fn sweep(
    cfg: &RunConfig,
    data: Matrix,
    labels: Option<&LabelVector>,
    max_depth: usize,
) -> anyhow::Result<(Vec<unfolding::SweepRow>, RunConfig)> {
    ensure!(max_depth > 0, "max_depth must be > 0");
    let (problem, effective) = setup(cfg, data, labels)?;
    let stage = configured_stage(&effective)?;
    let mut rows = Vec::with_capacity(max_depth);
    for depth in 1..=max_depth {
        let mut at_depth = effective.clone();
        at_depth.model.depth = depth;
        let model = initial_model(&at_depth, &problem, at_depth.model.tying.into(), stage)?;
        let outcome = unfolding::train(&model, &problem, &at_depth.train_config())
            .with_context(|| format!("training depth {depth}"))?;
        rows.push(unfolding::SweepRow {
            depth,
            initial_loss: outcome.history[0],
            trained_loss: outcome.best_loss,
        });
    }
    Ok((rows, effective))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth, SynthParams};

    fn small() -> (RunConfig, Matrix, LabelVector) {
        let s = synth(&SynthParams {
            features: 20,
            samples: 40,
            clusters: 3,
            informative: 5,
            ..Default::default()
        })
        .unwrap();
        let cfg = RunConfig {
            data_path: "mem".into(),
            feature_counts: vec![5],
            repeats: 2,
            ..Default::default()
        };
        (cfg, s.data, s.labels)
    }

    #[test]
    fn component_count_resolution() {
        let l = LabelVector::from_assignments(vec![0, 1, 2]).unwrap();
        assert_eq!(resolve_components(0, Some(&l)), 3);
        assert_eq!(resolve_components(0, None), FALLBACK_COMPONENTS);
        assert_eq!(resolve_components(5, Some(&l)), 5);
    }

    #[test]
    fn setup_fills_effective_values_and_checks_labels() {
        let (cfg, data, labels) = small();
        let (problem, eff) = setup(&cfg, data.clone(), Some(&labels)).unwrap();
        assert_eq!(eff.m, 3);
        assert_eq!(problem.components(), 3);
        let eta = eff.solver.eta.unwrap();
        assert_eq!(eta, admm::default_eta(problem.spectral_norm(), 1.0, 1.0));
        let short = LabelVector::from_assignments(vec![0, 1]).unwrap();
        assert!(setup(&cfg, data, Some(&short)).is_err());
    }

    #[test]
    fn grid_search_keeps_the_lowest_loss() {
        let (cfg, data, _) = small();
        let (problem, eff) = setup(&cfg, data, None).unwrap();
        let base = SolverParams {
            max_iters: 5,
            tol: 0.0,
            ..solver_params(&eff)
        };
        let (points, best, sol) =
            grid_search(&problem, &base, &[0.01, 1.0], &[0.01, 0.1, 1.0], 0.1, 0.1).unwrap();
        assert_eq!(points.len(), 6);
        assert_eq!(
            (points[0].lambda, points[2].mu, points[3].lambda),
            (0.01, 1.0, 1.0)
        );
        assert!(points.iter().all(|p| p.loss >= points[best].loss));
        let refit = objective(problem.data(), sol.projection(), 0.1, 0.1).unwrap();
        assert_eq!(refit, points[best].loss);
    }

    #[test]
    fn ablation_rows_in_order_with_non_increasing_loss() {
        let (mut cfg, data, labels) = small();
        cfg.train.iterations = 10;
        let (rows, _) = ablate(&cfg, data, Some(&labels)).unwrap();
        let names: Vec<_> = rows.iter().map(|r| r.configuration).collect();
        assert_eq!(names, ABLATION_CONFIGURATIONS);
        assert!(rows[2].loss <= rows[0].loss);
        assert!(rows[3].loss <= rows[2].loss);
        assert!(rows.iter().all(|r| r.eval.is_some()));
    }

    #[test]
    fn spcanet_without_training_reproduces_the_solver() {
        let (mut cfg, data, labels) = small();
        cfg.solver.max_iters = cfg.model.depth;
        cfg.solver.tol = 0.0;
        let admm = run(&cfg, data.clone(), Some(&labels)).unwrap();
        cfg.mode = Mode::Spcanet;
        cfg.train.iterations = 0;
        let net = run(&cfg, data, Some(&labels)).unwrap();
        assert_eq!(admm.projection, net.projection);
        assert_eq!(admm.history, net.history);
        assert_eq!(admm.eval, net.eval);
    }

    #[test]
    fn network_modes_need_positive_parameters() {
        let (mut cfg, data, _) = small();
        cfg.mode = Mode::Spcanet;
        cfg.solver.lambda = 0.0;
        let e = run(&cfg, data, None).unwrap_err();
        assert!(format!("{e:#}").contains("strictly positive"));
    }
}
