//! Induced single-agent MDPs and their exact solution.
//!
//! When every opponent commits to a stationary profile, agent `j` faces an
//! ordinary MDP whose transitions and rewards are the game's, marginalized
//! over the opponents' joint action. Its optimal Q-function is computed by
//! synchronous value iteration with a sup-norm stopping rule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameError, GameSpec, OpponentProfile, PolicyTable};
use crate::PROB_TOL;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("agent index {0} out of range")]
    AgentOutOfRange(usize),
    #[error("profile is for agent {profile}, requested agent {requested}")]
    ProfileMismatch { profile: usize, requested: usize },
    #[error("malformed MDP: {0}")]
    Malformed(String),
    #[error("solver tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("discount {0} outside [0, 1)")]
    InvalidDiscount(f64),
    #[error("value iteration did not reach tolerance within {iterations} iterations (residual {residual})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("mixture weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("mixture weight {0} is negative or not finite")]
    BadWeight(f64),
    #[error("empty mixture")]
    EmptyMixture,
    #[error("Q-function shapes differ")]
    ShapeMismatch,
}

/// `M(pi_{-j}) = <S, A_j, T^pi, R^pi, gamma>`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMdp {
    agent: usize,
    num_states: usize,
    num_actions: usize,
    trans: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    discount: f64,
}

impl InducedMdp {
    /// Direct construction, indexed `[s * num_actions + a]`.
    pub fn new(
        agent: usize,
        num_states: usize,
        num_actions: usize,
        trans: Vec<Vec<(usize, f64)>>,
        reward: Vec<f64>,
        discount: f64,
    ) -> Result<Self, MdpError> {
        let rows = num_states * num_actions;
        if num_states == 0 || num_actions == 0 {
            return Err(MdpError::Malformed("empty state or action set".into()));
        }
        if trans.len() != rows || reward.len() != rows {
            return Err(MdpError::Malformed(format!(
                "expected {rows} rows, got {} transitions and {} rewards",
                trans.len(),
                reward.len()
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(MdpError::InvalidDiscount(discount));
        }
        for (row, dist) in trans.iter().enumerate() {
            if dist
                .iter()
                .any(|&(t, p)| t >= num_states || p.is_nan() || p < 0.0)
            {
                return Err(MdpError::Malformed(format!(
                    "row {row}: bad successor entry"
                )));
            }
            let mass: f64 = dist.iter().map(|(_, p)| p).sum();
            if (mass - 1.0).abs() > PROB_TOL {
                return Err(MdpError::Malformed(format!("row {row}: mass {mass}")));
            }
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(MdpError::Malformed("non-finite reward".into()));
        }
        Ok(Self {
            agent,
            num_states,
            num_actions,
            trans,
            reward,
            discount,
        })
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn transition(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.trans[s * self.num_actions + a]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }
}

/// Marginalizes the game over the opponents' profile from `j`'s perspective.
pub fn induce_mdp(
    game: &GameSpec,
    j: usize,
    profile: &OpponentProfile,
) -> Result<InducedMdp, MdpError> {
    if j >= game.num_agents() {
        return Err(MdpError::AgentOutOfRange(j));
    }
    if profile.agent() != j {
        return Err(MdpError::ProfileMismatch {
            profile: profile.agent(),
            requested: j,
        });
    }
    if profile.num_states() != game.num_states() {
        return Err(MdpError::Malformed(
            "profile state count differs from game".into(),
        ));
    }
    let n_states = game.num_states();
    let n_actions = game.num_actions(j);
    let mut trans = Vec::with_capacity(n_states * n_actions);
    let mut reward = Vec::with_capacity(n_states * n_actions);
    let mut acc = vec![0.0; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            acc.iter_mut().for_each(|x| *x = 0.0);
            let mut r = 0.0;
            for (o, &p) in profile.row(s).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let joint = profile.full_joint(game, a, o);
                r += p * game.reward(j, s, joint);
                for &(t, q) in game.transition(s, joint) {
                    acc[t] += p * q;
                }
            }
            trans.push(
                acc.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(t, &p)| (t, p))
                    .collect(),
            );
            reward.push(r);
        }
    }
    Ok(InducedMdp {
        agent: j,
        num_states: n_states,
        num_actions: n_actions,
        trans,
        reward,
        discount: game.discount(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Sup-norm stopping threshold on successive Q iterates.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 100_000,
        }
    }
}

/// Optimal action values of an [`InducedMdp`].
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    agent: usize,
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
    residual: f64,
    iterations: usize,
}

impl QFunction {
    /// Wraps a raw table, indexed `[s * num_actions + a]`.
    pub fn from_values(
        agent: usize,
        num_states: usize,
        num_actions: usize,
        values: Vec<f64>,
    ) -> Result<Self, MdpError> {
        if num_states == 0 || num_actions == 0 || values.len() != num_states * num_actions {
            return Err(MdpError::ShapeMismatch);
        }
        Ok(Self {
            agent,
            num_states,
            num_actions,
            values,
            residual: 0.0,
            iterations: 0,
        })
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    /// Sup-norm change of the final iteration; bounds the Bellman residual
    /// of the returned values.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `max_a Q(s, a)`.
    pub fn state_value(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn solve_value_iteration(
    mdp: &InducedMdp,
    config: &SolverConfig,
) -> Result<QFunction, MdpError> {
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(MdpError::InvalidTolerance(config.tol));
    }
    if !(0.0..1.0).contains(&mdp.discount) {
        return Err(MdpError::InvalidDiscount(mdp.discount));
    }
    let (ns, na) = (mdp.num_states, mdp.num_actions);
    let mut q = vec![0.0; ns * na];
    let mut next = vec![0.0; ns * na];
    let mut v = vec![0.0; ns];
    let mut residual = f64::INFINITY;
    for iteration in 1..=config.max_iterations {
        for s in 0..ns {
            v[s] = q[s * na..(s + 1) * na]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        }
        residual = 0.0;
        for row in 0..ns * na {
            let future: f64 = mdp.trans[row].iter().map(|&(t, p)| p * v[t]).sum();
            next[row] = mdp.reward[row] + mdp.discount * future;
            residual = f64::max(residual, (next[row] - q[row]).abs());
        }
        std::mem::swap(&mut q, &mut next);
        if residual <= config.tol {
            return Ok(QFunction {
                agent: mdp.agent,
                num_states: ns,
                num_actions: na,
                values: q,
                residual,
                iterations: iteration,
            });
        }
    }
    Err(MdpError::NotConverged {
        iterations: config.max_iterations,
        residual,
    })
}

/// Lowest index among the maxima; comparisons are exact.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

fn pure_policy(
    agent: usize,
    num_actions: usize,
    choices: impl Iterator<Item = usize>,
) -> PolicyTable {
    let probs = choices
        .map(|a| {
            let mut row = vec![0.0; num_actions];
            row[a] = 1.0;
            row
        })
        .collect();
    PolicyTable::new(agent, probs).expect("one-hot rows are distributions")
}

/// Deterministic policy `argmax_a Q(s, a)` with lowest-index tie-break.
pub fn greedy_policy(q: &QFunction) -> PolicyTable {
    pure_policy(
        q.agent,
        q.num_actions,
        (0..q.num_states).map(|s| argmax(q.row(s).iter().copied())),
    )
}

/// QMDP action choice: per state, `argmax_a sum_i w_i Q_i(s, a)`.
pub fn qmdp_policy(weighted: &[(f64, &QFunction)]) -> Result<PolicyTable, MdpError> {
    let (_, first) = weighted.first().ok_or(MdpError::EmptyMixture)?;
    let mut total = 0.0;
    for &(w, q) in weighted {
        if !w.is_finite() || w < 0.0 {
            return Err(MdpError::BadWeight(w));
        }
        if q.num_states != first.num_states
            || q.num_actions != first.num_actions
            || q.agent != first.agent
        {
            return Err(MdpError::ShapeMismatch);
        }
        total += w;
    }
    if (total - 1.0).abs() > PROB_TOL {
        return Err(MdpError::WeightSum(total));
    }
    let na = first.num_actions;
    Ok(pure_policy(
        first.agent,
        na,
        (0..first.num_states)
            .map(|s| argmax((0..na).map(|a| weighted.iter().map(|&(w, q)| w * q.get(s, a)).sum()))),
    ))
}
