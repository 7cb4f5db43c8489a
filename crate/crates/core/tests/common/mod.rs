//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the solver or the conjugate update: policy values
//! come from a direct linear solve and posterior means from quadrature.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use tom_core::game::{opponent_product, PolicyTable};
use tom_core::mdp::{induce_mdp, InducedMdp};
use tom_core::GameSpec;

/// Exact value of a deterministic stationary policy: solves
/// `(I - gamma P_pi) v = r_pi`.
pub fn policy_value(mdp: &InducedMdp, choice: &[usize]) -> Vec<f64> {
    let n = mdp.num_states();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut r = DVector::<f64>::zeros(n);
    for s in 0..n {
        r[s] = mdp.reward(s, choice[s]);
        for &(t, p) in mdp.transition(s, choice[s]) {
            a[(s, t)] -= mdp.discount() * p;
        }
    }
    let v = a
        .lu()
        .solve(&r)
        .expect("I - gamma P is nonsingular for gamma < 1");
    v.iter().copied().collect()
}

/// Every deterministic stationary policy, as per-state action choices.
pub fn all_policies(num_states: usize, num_actions: usize) -> Vec<Vec<usize>> {
    let total = num_actions.pow(num_states as u32);
    (0..total)
        .map(|mut code| {
            (0..num_states)
                .map(|_| {
                    let a = code % num_actions;
                    code /= num_actions;
                    a
                })
                .collect()
        })
        .collect()
}

/// Per-state maximum over all enumerated deterministic policies.
pub fn brute_force_optimum(mdp: &InducedMdp) -> Vec<f64> {
    let mut best = vec![f64::NEG_INFINITY; mdp.num_states()];
    for choice in all_policies(mdp.num_states(), mdp.num_actions()) {
        for (b, v) in best.iter_mut().zip(policy_value(mdp, &choice)) {
            *b = b.max(v);
        }
    }
    best
}

pub fn pure_choices(policy: &PolicyTable) -> Vec<usize> {
    (0..policy.num_states())
        .map(|s| policy.pure_action(s).expect("pure policy"))
        .collect()
}

pub fn random_policy<R: Rng>(rng: &mut R, game: &GameSpec, agent: usize) -> PolicyTable {
    let rows = (0..game.num_states())
        .map(|_| {
            let w: Vec<f64> = (0..game.num_actions(agent))
                .map(|_| rng.gen::<f64>() + 1e-3)
                .collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|x| x / total).collect()
        })
        .collect();
    PolicyTable::new(agent, rows).unwrap()
}

/// Agent 0's MDP against random stochastic policies for everyone else.
pub fn random_induced<R: Rng>(rng: &mut R, game: &GameSpec) -> InducedMdp {
    let others: Vec<PolicyTable> = (1..game.num_agents())
        .map(|i| random_policy(rng, game, i))
        .collect();
    let refs: Vec<&PolicyTable> = others.iter().collect();
    let profile = opponent_product(game, 0, &refs).unwrap();
    induce_mdp(game, 0, &profile).unwrap()
}

/// `E[lambda | levels]` for a `Gamma(a, b)` prior and Poisson likelihood,
/// by composite Simpson quadrature of the unnormalized
/// `prod_r Poisson(k_r; lambda) * Gamma(lambda; a, b)` density.
///
/// Integrates over `x = ln lambda`, where the integrand decays like
/// `e^{(a + sum k) x}` on the left and has no endpoint singularity.
pub fn quadrature_posterior_mean(a: f64, b: f64, levels: &[usize]) -> f64 {
    let ln_facts: Vec<f64> = levels
        .iter()
        .map(|&k| (2..=k).map(|i| (i as f64).ln()).sum())
        .collect();
    // log of density(lambda) * dlambda/dx
    let log_integrand = |x: f64| -> f64 {
        let lambda = x.exp();
        let prior = (a - 1.0) * x - b * lambda;
        let likelihood: f64 = levels
            .iter()
            .zip(&ln_facts)
            .map(|(&k, ln_fact)| -lambda + k as f64 * x - ln_fact)
            .sum();
        prior + likelihood + x
    };
    // rough location and scale, used only to place the grid
    let m = levels.len() as f64;
    let s: f64 = levels.iter().sum::<usize>() as f64;
    let center = (a + s) / (b + m);
    let spread = (a + s).sqrt() / (b + m);
    let lo = center.ln() - 60.0 / (a + s);
    let hi = (center + 60.0 * spread + 10.0).ln();
    let intervals = 20_000;
    let h = (hi - lo) / intervals as f64;
    let logs: Vec<f64> = (0..=intervals)
        .map(|i| log_integrand(lo + i as f64 * h))
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut mass = 0.0;
    let mut first_moment = 0.0;
    for (i, l) in logs.iter().enumerate() {
        let weight = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let d = (l - peak).exp();
        mass += weight * d;
        first_moment += weight * (lo + i as f64 * h).exp() * d;
    }
    first_moment / mass
}
