//! Linearized ADMM for
//!
//! ```text
//! min ½‖A − XXᵀA‖²_F + λ‖Y‖_{2,1} + μ‖Z‖₁   s.t.  XᵀX = I, X = Y, X = Z
//! ```
//!
//! One iteration updates X (linearized step + Stiefel projection), then Y
//! (row shrinkage), then Z (elementwise shrinkage), then both multipliers.
//! The step functions here are the only implementation of that iteration;
//! the unfolded network in [`crate::unfolding`] calls them stage by stage.

use alloc::vec::Vec;

use crate::error::{check_non_negative, check_positive, Error, Result};
use crate::float::sqrt;
use crate::linalg::{left_singular_vectors, norm_fro, objective, thin_svd, Matrix};
use crate::prox::{group_soft_threshold, soft_threshold, stiefel_project};

/// Which data term the linearized X-step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMode {
    /// `(XXᵀ − I)·AAᵀ·X`, the gradient of the reconstruction term on the
    /// Stiefel manifold.
    #[default]
    Exact,
    /// `AAᵀ·X`, the data term exactly as it is usually printed for this
    /// scheme. Kept for fidelity comparisons.
    Literal,
}

/// The scalars one ADMM iteration (or one network stage) needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub gradient_mode: GradientMode,
}

impl StepParams {
    pub fn validate(&self) -> Result<()> {
        check_non_negative("StepParams", "lambda", self.lambda)?;
        check_non_negative("StepParams", "mu", self.mu)?;
        check_positive("StepParams", "alpha", self.alpha)?;
        check_positive("StepParams", "beta", self.beta)?;
        check_positive("StepParams", "eta", self.eta)
    }
}

/// Parameters of a fixed-parameter solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta: f64,
    pub max_iters: usize,
    /// Stop once `max(‖X−Y‖_F, ‖X−Z‖_F)/√(d·m) ≤ tol`. Zero disables the
    /// test so exactly `max_iters` iterations run.
    pub tol: f64,
    pub gradient_mode: GradientMode,
}

pub const DEFAULT_LAMBDA: f64 = 0.1;
pub const DEFAULT_MU: f64 = 0.1;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-6;

/// `1/(2‖A‖₂² + α + β)`, a step below the inverse Lipschitz bound of the
/// linearized objective.
pub fn default_eta(spectral_norm: f64, alpha: f64, beta: f64) -> f64 {
    1.0 / (2.0 * spectral_norm * spectral_norm + alpha + beta)
}

impl SolverParams {
    /// Default parameters for `problem`; `eta` depends on its spectral norm.
    pub fn defaults_for(problem: &Problem) -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            mu: DEFAULT_MU,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            eta: default_eta(problem.spectral_norm(), DEFAULT_ALPHA, DEFAULT_BETA),
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            gradient_mode: GradientMode::Exact,
        }
    }

    pub fn step(&self) -> StepParams {
        StepParams {
            lambda: self.lambda,
            mu: self.mu,
            alpha: self.alpha,
            beta: self.beta,
            eta: self.eta,
            gradient_mode: self.gradient_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.step().validate()?;
        check_non_negative("SolverParams", "tol", self.tol)?;
        if self.max_iters == 0 {
            return Err(Error::OutOfRange {
                op: "SolverParams",
                what: "max_iters",
                value: 0,
                min: 1,
                max: usize::MAX,
            });
        }
        Ok(())
    }
}

/// Data matrix plus everything about it that does not change across
/// iterations: `AAᵀ`, the singular values and the deterministic start point.
#[derive(Debug, Clone)]
pub struct Problem {
    a: Matrix,
    gram: Matrix,
    m: usize,
    x0: Matrix,
    sigma: Vec<f64>,
}

impl Problem {
    /// `a` is d×n (features by samples), used as given (no centering);
    /// `m` is the number of projection columns, `1 ≤ m ≤ min(d, n)`.
    pub fn new(a: Matrix, m: usize) -> Result<Self> {
        let (d, n) = a.shape();
        if m == 0 || m > d.min(n) {
            return Err(Error::OutOfRange {
                op: "init_state",
                what: "m",
                value: m,
                min: 1,
                max: d.min(n),
            });
        }
        if !a.is_finite() {
            return Err(Error::Invalid("data matrix has non-finite entries".into()));
        }
        let (x0, sigma) = left_singular_vectors(&a, m)?;
        let gram = a.gram();
        Ok(Self {
            a,
            gram,
            m,
            x0,
            sigma,
        })
    }

    pub fn data(&self) -> &Matrix {
        &self.a
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn features(&self) -> usize {
        self.a.rows()
    }

    pub fn samples(&self) -> usize {
        self.a.cols()
    }

    pub fn components(&self) -> usize {
        self.m
    }

    /// Largest singular value `‖A‖₂`.
    pub fn spectral_norm(&self) -> f64 {
        self.sigma.first().copied().unwrap_or(0.0)
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    /// The top-`m` left singular vectors, the solver's start point.
    pub fn initial_projection(&self) -> &Matrix {
        &self.x0
    }
}

/// The iterate `(X, Y, Z, Λ, Π)` with its primal residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Matrix,
    pub y: Matrix,
    pub z: Matrix,
    /// Multiplier Λ for `X = Y`.
    pub dual_y: Matrix,
    /// Multiplier Π for `X = Z`.
    pub dual_z: Matrix,
    pub iter: usize,
    pub primal_residual_y: f64,
    pub primal_residual_z: f64,
}

impl SolverState {
    /// `max(‖X−Y‖, ‖X−Z‖)/√(d·m)`.
    pub fn normalized_residual(&self) -> f64 {
        let scale = sqrt((self.x.rows() * self.x.cols()) as f64);
        self.primal_residual_y.max(self.primal_residual_z) / scale
    }
}

/// `X⁰` = top-`m` left singular vectors, `Y⁰ = Z⁰ = X⁰`, zero multipliers.
pub fn init_state(problem: &Problem) -> SolverState {
    let x = problem.x0.clone();
    let (d, m) = x.shape();
    SolverState {
        y: x.clone(),
        z: x.clone(),
        x,
        dual_y: Matrix::zeros(d, m),
        dual_z: Matrix::zeros(d, m),
        iter: 0,
        primal_residual_y: 0.0,
        primal_residual_z: 0.0,
    }
}

/// Gradient of the X-subproblem objective at the current iterate.
pub fn grad_f(problem: &Problem, state: &SolverState, step: &StepParams) -> Matrix {
    let x = &state.x;
    let cx = problem.gram.matmul(x);
    let data_term = match step.gradient_mode {
        GradientMode::Exact => x.matmul(&x.tr_matmul(&cx)).sub(&cx),
        GradientMode::Literal => cx,
    };
    let (alpha, beta) = (step.alpha, step.beta);
    let mut g = data_term;
    let parts = [&state.x, &state.y, &state.z, &state.dual_y, &state.dual_z];
    let [xs, ys, zs, ls, ps] = parts.map(Matrix::as_slice);
    for (k, out) in g.as_mut_slice().iter_mut().enumerate() {
        *out += alpha * (xs[k] - ys[k] + ls[k] / alpha) + beta * (xs[k] - zs[k] + ps[k] / beta);
    }
    g
}

/// Largest `‖XᵀX − I‖_F` an X-step may produce before it is reported as a
/// numerical failure.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-8;

/// `X ← UVᵀ` where `UΣVᵀ = X − η·grad_f`.
pub fn update_x(problem: &Problem, state: &mut SolverState, step: &StepParams) -> Result<()> {
    update_x_mixed(problem, state, step, None)
}

/// X-step with optional learned mixing `(W_u, W_v)`: the new X is the
/// Stiefel projection of `(W_u·U)(W_v·V)ᵀ`. Identity mixing is the plain step.
pub(crate) fn update_x_mixed(
    problem: &Problem,
    state: &mut SolverState,
    step: &StepParams,
    mixing: Option<(&Matrix, &Matrix)>,
) -> Result<()> {
    let g = grad_f(problem, state, step);
    let b = state.x.sub(&g.scale(step.eta));
    let svd = thin_svd(&b)?;
    state.x = match mixing {
        Some((wu, wv)) if !(wu.is_identity() && wv.is_identity()) => {
            stiefel_project(&wu.matmul(&svd.u).matmul(&svd.vt.matmul_tr(wv)))?
        }
        _ => svd.u.matmul(&svd.vt),
    };
    let error = state.x.orthogonality_error();
    if error.is_nan() || error > ORTHOGONALITY_TOLERANCE {
        return Err(Error::LostOrthogonality { error });
    }
    Ok(())
}

/// `Y ← GSoft(X + Λ/α, λ/α)`.
pub fn update_y(state: &mut SolverState, step: &StepParams) -> Result<()> {
    let alpha = step.alpha;
    let b = state.x.zip_map(&state.dual_y, |x, l| x + l / alpha);
    state.y = group_soft_threshold(&b, step.lambda / alpha)?;
    Ok(())
}

/// `Z ← Soft(X + Π/β, μ/β)`.
pub fn update_z(state: &mut SolverState, step: &StepParams) -> Result<()> {
    let beta = step.beta;
    let b = state.x.zip_map(&state.dual_z, |x, p| x + p / beta);
    state.z = soft_threshold(&b, step.mu / beta)?;
    Ok(())
}

/// `Λ ← Λ + α(X − Y)`, `Π ← Π + β(X − Z)`, then refresh the residuals.
pub fn update_duals(state: &mut SolverState, step: &StepParams) {
    let (alpha, beta) = (step.alpha, step.beta);
    let ry = state.x.sub(&state.y);
    let rz = state.x.sub(&state.z);
    state.dual_y = state.dual_y.zip_map(&ry, |l, r| l + alpha * r);
    state.dual_z = state.dual_z.zip_map(&rz, |p, r| p + beta * r);
    state.primal_residual_y = norm_fro(&ry);
    state.primal_residual_z = norm_fro(&rz);
}

/// One full iteration in the fixed order X, Y, Z, multipliers.
pub fn iterate(problem: &Problem, state: &mut SolverState, step: &StepParams) -> Result<()> {
    iterate_mixed(problem, state, step, None)
}

pub(crate) fn iterate_mixed(
    problem: &Problem,
    state: &mut SolverState,
    step: &StepParams,
    mixing: Option<(&Matrix, &Matrix)>,
) -> Result<()> {
    update_x_mixed(problem, state, step, mixing)?;
    update_y(state, step)?;
    update_z(state, step)?;
    update_duals(state, step);
    state.iter += 1;
    Ok(())
}

/// Per-iteration record of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    /// Structured sparse PCA objective at X with the solve's λ, μ.
    pub objective: f64,
    pub primal_residual_y: f64,
    pub primal_residual_z: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub state: SolverState,
    pub history: Vec<IterRecord>,
    /// False when the loop stopped at `max_iters`.
    pub converged: bool,
}

impl Solution {
    pub fn projection(&self) -> &Matrix {
        &self.state.x
    }
}

/// Runs the iteration from [`init_state`] until the normalized primal
/// residual drops to `tol` or `max_iters` iterations have run.
pub fn solve(problem: &Problem, params: &SolverParams) -> Result<Solution> {
    solve_observed(problem, params, |_| {})
}

/// [`solve`] that hands every post-iteration state to `observe`.
pub fn solve_observed(
    problem: &Problem,
    params: &SolverParams,
    mut observe: impl FnMut(&SolverState),
) -> Result<Solution> {
    params.validate()?;
    let step = params.step();
    let mut state = init_state(problem);
    let mut history = Vec::with_capacity(params.max_iters.min(4096));
    let mut converged = false;
    while state.iter < params.max_iters {
        iterate(problem, &mut state, &step)?;
        observe(&state);
        history.push(IterRecord {
            iter: state.iter,
            objective: objective(&problem.a, &state.x, params.lambda, params.mu)?,
            primal_residual_y: state.primal_residual_y,
            primal_residual_z: state.primal_residual_z,
        });
        if params.tol > 0.0 && state.normalized_residual() <= params.tol {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        state,
        history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm_l21;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = SmallRng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn params(problem: &Problem) -> SolverParams {
        SolverParams::defaults_for(problem)
    }

    #[test]
    fn init_identity_data() {
        let p = Problem::new(Matrix::identity(4), 2).unwrap();
        let s = init_state(&p);
        assert_eq!(s.x, Matrix::eye(4, 2));
        assert_eq!(s.y, s.x);
        assert_eq!(s.z, s.x);
        assert_eq!(s.dual_y, Matrix::zeros(4, 2));
        assert_eq!(s.iter, 0);
    }

    #[test]
    fn init_dominant_axis() {
        let p = Problem::new(Matrix::diag(3, 3, &[3.0, 2.0, 1.0]), 1).unwrap();
        assert_eq!(init_state(&p).x.col(0), alloc::vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn init_matches_tail_energy() {
        let a = random(10, 20, 5);
        let p = Problem::new(a.clone(), 3).unwrap();
        let x = init_state(&p).x;
        assert!(x.orthogonality_error() < 1e-10);
        let resid = norm_fro(&a.sub(&x.matmul(&x.tr_matmul(&a))));
        let tail: f64 = p.singular_values()[3..]
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt();
        assert!((resid - tail).abs() < 1e-8, "{resid} vs {tail}");
    }

    #[test]
    fn component_count_validated() {
        assert!(matches!(
            Problem::new(Matrix::zeros(3, 5), 4),
            Err(Error::OutOfRange { what: "m", .. })
        ));
        assert!(Problem::new(Matrix::zeros(3, 5), 0).is_err());
    }

    #[test]
    fn grad_zero_at_stationary_split() {
        let p = Problem::new(Matrix::zeros(4, 6), 2).unwrap();
        let s = init_state(&p);
        let g = grad_f(&p, &s, &params(&p).step());
        assert_eq!(g, Matrix::zeros(4, 2));
    }

    #[test]
    fn literal_mode_is_gram_times_x() {
        let a = random(6, 9, 3);
        let p = Problem::new(a.clone(), 2).unwrap();
        let s = init_state(&p);
        let mut step = params(&p).step();
        step.gradient_mode = GradientMode::Literal;
        let g = grad_f(&p, &s, &step);
        let want = a.matmul(&a.tr_matmul(&s.x));
        assert!(norm_fro(&g.sub(&want)) < 1e-12);
    }

    #[test]
    fn zero_gradient_keeps_x() {
        let p = Problem::new(Matrix::zeros(5, 5), 2).unwrap();
        let mut s = init_state(&p);
        let before = s.x.clone();
        update_x(&p, &mut s, &params(&p).step()).unwrap();
        assert!(norm_fro(&s.x.sub(&before)) < 1e-15);
    }

    #[test]
    fn x_step_descends_toward_dominant_axis() {
        let a = Matrix::diag(2, 2, &[2.0, 1.0]);
        let p = Problem::new(a.clone(), 1).unwrap();
        let mut s = init_state(&p);
        // Start from the minor axis, slightly tilted so the gradient is nonzero.
        let t: f64 = 0.05;
        s.x = Matrix::from_rows(&[[t.sin()], [t.cos()]]).unwrap();
        s.y = s.x.clone();
        s.z = s.x.clone();
        let step = StepParams {
            eta: 0.05,
            ..params(&p).step()
        };
        let f = |x: &Matrix| objective(&a, x, 0.0, 0.0).unwrap();
        let (before, x1_before) = (f(&s.x), s.x[(0, 0)].abs());
        update_x(&p, &mut s, &step).unwrap();
        assert!(s.x[(0, 0)].abs() > x1_before);
        assert!(f(&s.x) < before);
    }

    #[test]
    fn x_step_keeps_orthonormality() {
        let p = Problem::new(random(8, 12, 1), 3).unwrap();
        let mut s = init_state(&p);
        s.y = random(8, 3, 2);
        s.dual_z = random(8, 3, 3);
        update_x(&p, &mut s, &params(&p).step()).unwrap();
        assert!(s.x.orthogonality_error() < 1e-10);
    }

    #[test]
    fn y_and_z_steps_limits() {
        let p = Problem::new(random(6, 8, 4), 2).unwrap();
        let mut s = init_state(&p);
        s.dual_y = random(6, 2, 5);
        s.dual_z = random(6, 2, 6);
        let mut step = params(&p).step();
        step.lambda = 0.0;
        step.mu = 0.0;
        step.alpha = 2.0;
        step.beta = 4.0;
        update_y(&mut s, &step).unwrap();
        update_z(&mut s, &step).unwrap();
        assert_eq!(s.y, s.x.zip_map(&s.dual_y, |x, l| x + l / 2.0));
        assert_eq!(s.z, s.x.zip_map(&s.dual_z, |x, p| x + p / 4.0));

        step.lambda = 1e3;
        step.mu = 1e3;
        update_y(&mut s, &step).unwrap();
        update_z(&mut s, &step).unwrap();
        assert_eq!(s.y, Matrix::zeros(6, 2));
        assert_eq!(s.z, Matrix::zeros(6, 2));
    }

    #[test]
    fn y_step_matches_row_oracle() {
        let p = Problem::new(random(7, 9, 7), 3).unwrap();
        let mut s = init_state(&p);
        s.dual_y = random(7, 3, 8);
        let step = StepParams {
            lambda: 0.4,
            alpha: 1.5,
            ..params(&p).step()
        };
        update_y(&mut s, &step).unwrap();
        // Per row: minimize λ‖y‖ + α/2‖y − b‖²; the minimizer is t·b, so scan t.
        for i in 0..7 {
            let b: alloc::vec::Vec<f64> = (0..3)
                .map(|j| s.x[(i, j)] + s.dual_y[(i, j)] / 1.5)
                .collect();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let f = |t: f64| 0.4 * t * nb + 0.75 * (1.0 - t).powi(2) * nb * nb;
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            for _ in 0..200 {
                let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
                if f(m1) <= f(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let t = 0.5 * (lo + hi);
            for (y, bj) in s.y.row(i).iter().zip(&b) {
                assert!((y - t * bj).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn z_step_matches_scalar_oracle() {
        let p = Problem::new(random(5, 7, 9), 2).unwrap();
        let mut s = init_state(&p);
        s.dual_z = random(5, 2, 10);
        let step = StepParams {
            mu: 0.3,
            beta: 2.0,
            ..params(&p).step()
        };
        update_z(&mut s, &step).unwrap();
        for i in 0..5 {
            for j in 0..2 {
                let b = s.x[(i, j)] + s.dual_z[(i, j)] / 2.0;
                let tau = 0.15;
                let want = if b.abs() <= tau {
                    0.0
                } else {
                    b - tau * b.signum()
                };
                assert!((s.z[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dual_updates() {
        let p = Problem::new(random(4, 6, 11), 2).unwrap();
        let mut s = init_state(&p);
        let step = params(&p).step();
        update_duals(&mut s, &step);
        assert_eq!(s.dual_y, Matrix::zeros(4, 2));
        assert_eq!((s.primal_residual_y, s.primal_residual_z), (0.0, 0.0));

        let r = random(4, 2, 12);
        s.y = s.x.sub(&r);
        update_duals(&mut s, &step);
        let once = s.dual_y.clone();
        assert!(norm_fro(&once.sub(&r)) < 1e-15);
        update_duals(&mut s, &step);
        assert!(norm_fro(&s.dual_y.sub(&once.scale(2.0))) < 1e-15);
    }

    #[test]
    fn pca_case_recovers_low_rank_exactly() {
        let basis = random(8, 2, 13);
        let coeffs = random(2, 15, 14);
        let a = basis.matmul(&coeffs);
        let p = Problem::new(a.clone(), 2).unwrap();
        let sol = solve(
            &p,
            &SolverParams {
                lambda: 0.0,
                mu: 0.0,
                ..params(&p)
            },
        )
        .unwrap();
        assert!(objective(&a, sol.projection(), 0.0, 0.0).unwrap() < 1e-6);
    }

    /// Hand-run of the four formulas on A = 0 (2x2), m = 1, λ = μ = 0.1,
    /// α = β = 1: X stays at e₁, Y = Z = 0.9·e₁ after one step, the
    /// multipliers absorb the 0.1 gap and the second step closes it.
    #[test]
    fn zero_data_converges_quickly() {
        let p = Problem::new(Matrix::zeros(2, 2), 1).unwrap();
        let prm = params(&p);
        let mut s = init_state(&p);
        let step = prm.step();
        iterate(&p, &mut s, &step).unwrap();
        assert_eq!(s.x.col(0), alloc::vec![1.0, 0.0]);
        assert!((s.y[(0, 0)] - 0.9).abs() < 1e-15);
        assert!((s.dual_y[(0, 0)] - 0.1).abs() < 1e-15);

        let sol = solve(&p, &prm).unwrap();
        assert!(sol.converged);
        assert!(sol.history.len() <= 3);
        assert!(sol.state.normalized_residual() <= prm.tol);
    }

    #[test]
    fn tol_zero_runs_all_iterations() {
        let p = Problem::new(random(5, 8, 15), 2).unwrap();
        let sol = solve(
            &p,
            &SolverParams {
                lambda: 0.0,
                mu: 0.0,
                tol: 0.0,
                max_iters: 7,
                ..params(&p)
            },
        )
        .unwrap();
        assert_eq!(sol.history.len(), 7);
        assert!(!sol.converged);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = Problem::new(random(4, 4, 16), 1).unwrap();
        let bad = SolverParams {
            alpha: 0.0,
            ..params(&p)
        };
        assert!(solve(&p, &bad).is_err());
        let bad = SolverParams {
            max_iters: 0,
            ..params(&p)
        };
        assert!(solve(&p, &bad).is_err());
    }

    #[test]
    fn larger_lambda_sparsifies_rows() {
        let a = random(12, 30, 17);
        let p = Problem::new(a, 2).unwrap();
        let weak = solve(
            &p,
            &SolverParams {
                lambda: 0.01,
                ..params(&p)
            },
        )
        .unwrap();
        let strong = solve(
            &p,
            &SolverParams {
                lambda: 2.0,
                ..params(&p)
            },
        )
        .unwrap();
        assert!(norm_l21(&strong.state.y) <= norm_l21(&weak.state.y));
    }
}
