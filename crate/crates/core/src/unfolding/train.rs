//! Derivative-free training by simultaneous perturbation stochastic
//! approximation (SPSA).

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate_loss, ModelConfig, UnfoldedModel};
use crate::admm::Problem;
use crate::error::{check_positive, Result};
use crate::float::powf;

/// Gain-sequence exponents of the standard SPSA schedule.
const GAIN_DECAY: f64 = 0.602;
const PERTURBATION_DECAY: f64 = 0.101;
const CALIBRATION_DRAWS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Step gain `a` in `a_t = a/(t + A)^0.602`.
    pub spsa_a: f64,
    /// Perturbation size `c` in `c_t = c/t^0.101`.
    pub spsa_c: f64,
    /// Stability offset `A`.
    pub spsa_big_a: f64,
    /// Rescale `a` so the first step moves each parameter by about `spsa_a`,
    /// using the mean magnitude of a few gradient estimates at the start
    /// point. Without it `a` is applied to the raw estimate.
    pub calibrate_gain: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            spsa_a: 0.1,
            spsa_c: 0.1,
            spsa_big_a: 10.0,
            calibrate_gain: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("TrainConfig", "spsa_a", self.spsa_a)?;
        check_positive("TrainConfig", "spsa_c", self.spsa_c)?;
        check_positive("TrainConfig", "spsa_big_a", self.spsa_big_a)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Lowest-loss model seen during training (the input if nothing beat it).
    pub model: UnfoldedModel,
    pub best_loss: f64,
    /// Loss of the current iterate: the initial loss, then one entry per step.
    pub history: Vec<f64>,
    /// Steps skipped because a candidate produced a non-finite loss or a
    /// numerical error.
    pub rejected_steps: usize,
}

/// Minimizes the model's loss on `problem` over all trainable parameters.
///
/// Each step draws a Rademacher direction `δ`, evaluates the loss at
/// `θ ± c_t·δ` and moves along the two-point gradient estimate with gain
/// `a_t`. Every evaluated candidate competes for the returned best model, so
/// the result never has a higher loss than the input. All randomness comes
/// from `cfg.seed`.
pub fn train(model: &UnfoldedModel, problem: &Problem, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let initial = evaluate_loss(model, problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut current = model.clone();
    let mut theta = model.parameters();
    let mut current_loss = initial;
    let mut best = (model.clone(), initial);
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    history.push(initial);
    let mut rejected = 0;

    let mut candidate = model.clone();
    let eval = |theta: &[f64], into: &mut UnfoldedModel| -> Option<f64> {
        into.set_parameters(theta);
        evaluate_loss(into, problem).ok().filter(|l| l.is_finite())
    };
    let probe = |theta: &[f64],
                 c: f64,
                 rng: &mut ChaCha8Rng,
                 candidate: &mut UnfoldedModel,
                 best: &mut (UnfoldedModel, f64)|
     -> (Vec<f64>, Option<(f64, f64)>) {
        let delta: Vec<f64> = (0..theta.len())
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let plus: Vec<f64> = theta.iter().zip(&delta).map(|(p, d)| p + c * d).collect();
        let minus: Vec<f64> = theta.iter().zip(&delta).map(|(p, d)| p - c * d).collect();
        let (Some(loss_plus), Some(loss_minus)) = (eval(&plus, candidate), eval(&minus, candidate))
        else {
            return (delta, None);
        };
        for (params, l) in [(&plus, loss_plus), (&minus, loss_minus)] {
            if l < best.1 {
                candidate.set_parameters(params);
                *best = (candidate.clone(), l);
            }
        }
        (delta, Some((loss_plus, loss_minus)))
    };

    let mut gain = cfg.spsa_a;
    if cfg.calibrate_gain && cfg.iterations > 0 {
        let c = cfg.spsa_c;
        let magnitudes: Vec<f64> = (0..CALIBRATION_DRAWS)
            .filter_map(|_| probe(&theta, c, &mut rng, &mut candidate, &mut best).1)
            .map(|(lp, lm)| ((lp - lm) / (2.0 * c)).abs())
            .collect();
        let mean = magnitudes.iter().sum::<f64>() / magnitudes.len().max(1) as f64;
        if mean > 0.0 && mean.is_finite() {
            gain = cfg.spsa_a * powf(1.0 + cfg.spsa_big_a, GAIN_DECAY) / mean;
        }
    }

    for t in 1..=cfg.iterations {
        let tf = t as f64;
        let a_t = gain / powf(tf + cfg.spsa_big_a, GAIN_DECAY);
        let c_t = cfg.spsa_c / powf(tf, PERTURBATION_DECAY);
        let (delta, losses) = probe(&theta, c_t, &mut rng, &mut candidate, &mut best);
        let Some((loss_plus, loss_minus)) = losses else {
            rejected += 1;
            history.push(current_loss);
            continue;
        };

        let diff = (loss_plus - loss_minus) / (2.0 * c_t);
        let next: Vec<f64> = theta
            .iter()
            .zip(&delta)
            .map(|(p, d)| p - a_t * diff / d)
            .collect();
        match eval(&next, &mut current) {
            Some(l) => {
                theta = next;
                current_loss = l;
                if l < best.1 {
                    best = (current.clone(), l);
                }
            }
            None => {
                current.set_parameters(&theta);
                rejected += 1;
            }
        }
        history.push(current_loss);
    }

    Ok(TrainOutcome {
        model: best.0,
        best_loss: best.1,
        history,
        rejected_steps: rejected,
    })
}

/// One row of a depth sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub depth: usize,
    pub initial_loss: f64,
    pub trained_loss: f64,
}

/// Trains a fresh model for every depth `1..=max_depth` with the same
/// architecture settings and training budget.
pub fn stage_sweep(
    problem: &Problem,
    config: &ModelConfig,
    max_depth: usize,
    cfg: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    (1..=max_depth)
        .map(|depth| {
            let model = UnfoldedModel::new(problem, &ModelConfig { depth, ..*config })?;
            let outcome = train(&model, problem, cfg)?;
            Ok(SweepRow {
                depth,
                initial_loss: outcome.history[0],
                trained_loss: outcome.best_loss,
            })
        })
        .collect()
}
