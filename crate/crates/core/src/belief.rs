//! Beliefs over reasoning levels.
//!
//! An opponent's level is `Poisson(lambda)`, and `lambda` itself carries a
//! `Gamma(a, b)` prior (shape `a`, rate `b`). Observing levels `k_1..k_m`
//! gives the posterior `Gamma(a + sum k_r, b + m)`, whose mean is the point
//! estimate plugged back into the level weights.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::PolicyTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("Poisson rate must be finite and nonnegative, got {0}")]
    BadRate(f64),
    #[error("Gamma parameters must be positive and finite, got a={a}, b={b}")]
    BadGamma { a: f64, b: f64 },
    #[error("smoothing floor must lie in (0, 1), got {0}")]
    BadSmoothing(f64),
    #[error("no level policies to compare")]
    EmptyLevels,
    #[error("episode step {step} (state {state}, action {action}) outside the level policies")]
    EpisodeOutOfRange {
        step: usize,
        state: usize,
        action: usize,
    },
}

fn check_rate(lambda: f64) -> Result<(), BeliefError> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(BeliefError::BadRate(lambda))
    }
}

fn ln_factorial(k: u32) -> f64 {
    (2..=k).map(|i| f64::from(i).ln()).sum()
}

/// `ln f(k; lambda)`, minus infinity when the mass is zero.
fn ln_pmf_unchecked(k: u32, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -lambda + f64::from(k) * lambda.ln() - ln_factorial(k)
}

/// `e^{-lambda} lambda^k / k!`; switches to log space above k = 20.
pub fn poisson_pmf(k: u32, lambda: f64) -> Result<f64, BeliefError> {
    check_rate(lambda)?;
    if k > 20 {
        return Ok(ln_pmf_unchecked(k, lambda).exp());
    }
    let mut term = (-lambda).exp();
    for i in 1..=k {
        term *= lambda / f64::from(i);
    }
    Ok(term)
}

/// Poisson weights over levels `0..=k`, renormalized to condition on
/// "level at most k".
///
/// The common `e^{-lambda}` factor cancels, so the normalization runs on
/// `k ln lambda - ln k!` and stays finite when the raw masses would underflow.
pub fn truncated_level_weights(lambda: f64, k: usize) -> Result<Vec<f64>, BeliefError> {
    check_rate(lambda)?;
    if lambda == 0.0 {
        let mut w = vec![0.0; k + 1];
        w[0] = 1.0;
        return Ok(w);
    }
    let ln_lambda = lambda.ln();
    let mut logs = Vec::with_capacity(k + 1);
    let mut ln_fact = 0.0;
    for i in 0..=k {
        if i > 0 {
            ln_fact += (i as f64).ln();
        }
        logs.push(i as f64 * ln_lambda - ln_fact);
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Shape/rate parameters of a Gamma distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    a: f64,
    b: f64,
}

impl GammaParams {
    pub fn new(a: f64, b: f64) -> Result<Self, BeliefError> {
        if a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 {
            Ok(Self { a, b })
        } else {
            Err(BeliefError::BadGamma { a, b })
        }
    }

    pub fn shape(&self) -> f64 {
        self.a
    }

    pub fn rate(&self) -> f64 {
        self.b
    }
}

impl Default for GammaParams {
    /// `Gamma(2, 1)`, a mild prior centered on level 2.
    fn default() -> Self {
        Self { a: 2.0, b: 1.0 }
    }
}

/// Conjugate update `Gamma(a + sum k_r, b + m)`.
pub fn posterior_update(prior: GammaParams, observed_levels: &[usize]) -> GammaParams {
    let total: usize = observed_levels.iter().sum();
    GammaParams {
        a: prior.a + total as f64,
        b: prior.b + observed_levels.len() as f64,
    }
}

pub fn posterior_mean(p: GammaParams) -> f64 {
    p.a / p.b
}

/// A modeling agent's running Gamma posterior over the population's mean
/// reasoning level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefState {
    prior: GammaParams,
    posterior: GammaParams,
    lambda_hat: f64,
    depth_cap: usize,
    observations: usize,
    level_sum: usize,
}

impl BeliefState {
    pub fn new(prior: GammaParams, depth_cap: usize) -> Self {
        Self {
            prior,
            posterior: prior,
            lambda_hat: posterior_mean(prior),
            depth_cap,
            observations: 0,
            level_sum: 0,
        }
    }

    pub fn prior(&self) -> GammaParams {
        self.prior
    }

    pub fn posterior(&self) -> GammaParams {
        self.posterior
    }

    pub fn lambda_hat(&self) -> f64 {
        self.lambda_hat
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    /// `m`, the number of levels observed so far.
    pub fn observations(&self) -> usize {
        self.observations
    }

    /// `sum_r k_r` over all observations.
    pub fn level_sum(&self) -> usize {
        self.level_sum
    }

    /// Folds in one batch of observed levels. The posterior is recomputed
    /// from the prior and the integer running totals, so it does not depend
    /// on how observations were batched.
    pub fn observe(&mut self, levels: &[usize]) {
        self.observations += levels.len();
        self.level_sum += levels.iter().sum::<usize>();
        self.posterior = GammaParams {
            a: self.prior.a + self.level_sum as f64,
            b: self.prior.b + self.observations as f64,
        };
        self.lambda_hat = posterior_mean(self.posterior);
    }
}

/// Maximum-likelihood level of one opponent's `(state, action)` episode.
///
/// Each step contributes `ln max(pi_level(a | s), floor)`. Steps are tallied
/// per `(state, action)` pair and summed in sorted order, so the result does
/// not depend on episode order. Ties go to the lowest level.
pub fn infer_level(
    episode: &[(usize, usize)],
    levels: &[&PolicyTable],
    floor: f64,
) -> Result<usize, BeliefError> {
    if !(floor > 0.0 && floor < 1.0) {
        return Err(BeliefError::BadSmoothing(floor));
    }
    if levels.is_empty() {
        return Err(BeliefError::EmptyLevels);
    }
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (step, &(state, action)) in episode.iter().enumerate() {
        let fits = levels
            .iter()
            .all(|p| state < p.num_states() && action < p.num_actions());
        if !fits {
            return Err(BeliefError::EpisodeOutOfRange {
                step,
                state,
                action,
            });
        }
        *counts.entry((state, action)).or_default() += 1;
    }
    let log_likelihood = |policy: &PolicyTable| -> f64 {
        counts
            .iter()
            .map(|(&(s, a), &n)| n as f64 * policy.prob(s, a).max(floor).ln())
            .sum()
    };
    Ok(crate::mdp::argmax(levels.iter().map(|p| log_likelihood(p))))
}
