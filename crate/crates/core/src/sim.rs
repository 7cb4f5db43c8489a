//! Repeated-round experiments.
//!
//! A round is one fixed-horizon episode from the game's initial state. Before
//! each round every modeling agent takes its posterior mean as `lambda`,
//! refreshes its ladder and plays its QMDP response. After the round it infers
//! each opponent's level from that opponent's episode and folds the levels
//! into its Gamma posterior. Belief never changes inside a round.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{infer_level, BeliefError, BeliefState, GammaParams};
use crate::game::{GameError, GameSpec, PolicyTable};
use crate::hierarchy::{build_singleton, Hierarchy, HierarchyError, Mode};
use crate::mdp::SolverConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("at least one round is required")]
    ZeroRounds,
    #[error("start state {0} out of range")]
    BadStart(usize),
    #[error("expected one policy per agent ({expected}), got {got}")]
    PolicyCount { expected: usize, got: usize },
    #[error("policy slot {slot} holds a policy for agent {agent}")]
    PolicyOrder { slot: usize, agent: usize },
    #[error("expected one agent config per agent ({expected}), got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("agent {0} configured more than once")]
    DuplicateAgent(usize),
    #[error("agent {0} not configured")]
    MissingAgent(usize),
    #[error("agent {agent}: level {level} exceeds the depth cap {cap}")]
    LevelTooDeep {
        agent: usize,
        level: usize,
        cap: usize,
    },
}

/// Settings of a modeling (ToM) agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomConfig {
    pub mode: Mode,
    pub depth: usize,
    pub prior: GammaParams,
    /// Likelihood floor used when inferring opponents' levels.
    pub epsilon: f64,
}

impl Default for TomConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Singleton,
            depth: 2,
            prior: GammaParams::default(),
            epsilon: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentKind {
    Tom(TomConfig),
    /// Plays its level-`k` policy from a singleton ladder built once.
    FixedLevel(usize),
    Scripted(PolicyTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub agent: usize,
    pub kind: AgentKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub rounds: usize,
    pub horizon: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    /// Highest level any agent may be configured with.
    pub depth_cap: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            rounds: 10,
            horizon: 10,
            seed: 0,
            solver: SolverConfig::default(),
            depth_cap: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: usize,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

/// One episode, step by step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundTrace {
    pub steps: Vec<Step>,
}

impl RoundTrace {
    /// `(state, action)` pairs played by `agent`.
    pub fn episode_of(&self, agent: usize) -> Vec<(usize, usize)> {
        self.steps
            .iter()
            .map(|s| (s.state, s.actions[agent]))
            .collect()
    }
}

/// One modeling agent's bookkeeping for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefRecord {
    /// 1-based round index.
    pub round: usize,
    pub agent: usize,
    /// Rate the agent acted on this round.
    pub lambda_used: f64,
    /// Inferred level per agent index; `None` for the agent itself.
    pub inferred: Vec<Option<usize>>,
    /// Posterior after folding in this round's levels.
    pub posterior: GammaParams,
    pub lambda_hat: f64,
    /// MDP solves spent this round (round 1 includes the initial build).
    pub solves_delta: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rounds: Vec<RoundTrace>,
    pub beliefs: Vec<BeliefRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSummary {
    pub agent: usize,
    pub kind: String,
    pub discounted_returns: Vec<f64>,
    pub mean_discounted_return: f64,
    pub total_solves: Option<usize>,
    pub final_posterior: Option<GammaParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub trace: Trace,
    pub summary: Vec<AgentSummary>,
}

fn sample(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    WeightedIndex::new(weights)
        .expect("validated distributions have positive mass")
        .sample(rng)
}

/// Plays one episode of `horizon` steps from `start`, sampling actions from
/// `policies` (one per agent, in agent order) and successors from the game.
pub fn run_round(
    game: &GameSpec,
    policies: &[&PolicyTable],
    horizon: usize,
    start: usize,
    seed: u64,
) -> Result<RoundTrace, SimError> {
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    if start >= game.num_states() {
        return Err(SimError::BadStart(start));
    }
    if policies.len() != game.num_agents() {
        return Err(SimError::PolicyCount {
            expected: game.num_agents(),
            got: policies.len(),
        });
    }
    for (slot, p) in policies.iter().enumerate() {
        if p.agent() != slot {
            return Err(SimError::PolicyOrder {
                slot,
                agent: p.agent(),
            });
        }
        p.check_against(game)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = start;
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let actions: Vec<usize> = policies
            .iter()
            .map(|p| sample(p.row(state), &mut rng))
            .collect();
        let joint = game.joint_index(&actions);
        let rewards = (0..game.num_agents())
            .map(|i| game.reward(i, state, joint))
            .collect();
        let row = game.transition(state, joint);
        let probs: Vec<f64> = row.iter().map(|&(_, p)| p).collect();
        let next = row[sample(&probs, &mut rng)].0;
        steps.push(Step {
            state,
            actions,
            rewards,
        });
        state = next;
    }
    Ok(RoundTrace { steps })
}

/// `sum_t gamma^t r_{i,t}` over the logged steps.
pub fn discounted_return(round: &RoundTrace, agent: usize, gamma: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for step in &round.steps {
        total += weight * step.rewards[agent];
        weight *= gamma;
    }
    total
}

struct TomAgent {
    agent: usize,
    config: TomConfig,
    belief: BeliefState,
    hierarchy: Hierarchy,
    solves_reported: usize,
}

enum Slot<'a> {
    Tom(usize),
    Fixed(&'a PolicyTable),
    Scripted(&'a PolicyTable),
}

fn kind_label(kind: &AgentKind) -> String {
    match kind {
        AgentKind::Tom(c) => format!("tom:{},K={}", c.mode, c.depth),
        AgentKind::FixedLevel(k) => format!("level:{k}"),
        AgentKind::Scripted(_) => "scripted".to_string(),
    }
}

/// Runs `options.rounds` rounds of the belief loop. Fully determined by the
/// inputs and `options.seed`.
pub fn run_experiment(
    game: &GameSpec,
    agents: &[AgentConfig],
    options: &RunOptions,
) -> Result<Experiment, SimError> {
    let n = game.num_agents();
    if options.rounds == 0 {
        return Err(SimError::ZeroRounds);
    }
    if options.horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    if agents.len() != n {
        return Err(SimError::AgentCount {
            expected: n,
            got: agents.len(),
        });
    }
    let mut by_agent: Vec<Option<&AgentConfig>> = vec![None; n];
    for cfg in agents {
        let slot = by_agent
            .get_mut(cfg.agent)
            .ok_or(GameError::AgentOutOfRange(cfg.agent))?;
        if slot.is_some() {
            return Err(SimError::DuplicateAgent(cfg.agent));
        }
        *slot = Some(cfg);
    }
    let configs: Vec<&AgentConfig> = by_agent
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or(SimError::MissingAgent(i)))
        .collect::<Result<_, _>>()?;

    let mut fixed_depth = None;
    for cfg in &configs {
        let level = match &cfg.kind {
            AgentKind::Tom(t) => {
                GammaParams::new(t.prior.shape(), t.prior.rate())?;
                if !(t.epsilon > 0.0 && t.epsilon < 1.0) {
                    return Err(BeliefError::BadSmoothing(t.epsilon).into());
                }
                t.depth
            }
            AgentKind::FixedLevel(k) => {
                fixed_depth = Some(fixed_depth.unwrap_or(0).max(*k));
                *k
            }
            AgentKind::Scripted(p) => {
                p.check_against(game)?;
                if p.agent() != cfg.agent {
                    return Err(SimError::PolicyOrder {
                        slot: cfg.agent,
                        agent: p.agent(),
                    });
                }
                0
            }
        };
        if level > options.depth_cap {
            return Err(SimError::LevelTooDeep {
                agent: cfg.agent,
                level,
                cap: options.depth_cap,
            });
        }
    }

    let fixed_ladder = match fixed_depth {
        Some(depth) => Some(build_singleton(game, 0, depth, &options.solver)?),
        None => None,
    };

    let mut toms = Vec::new();
    let mut slots = Vec::with_capacity(n);
    for cfg in &configs {
        slots.push(match &cfg.kind {
            AgentKind::Tom(t) => {
                let belief = BeliefState::new(t.prior, t.depth);
                let hierarchy = Hierarchy::build(
                    game,
                    cfg.agent,
                    t.mode,
                    t.depth,
                    belief.lambda_hat(),
                    None,
                    &options.solver,
                )?;
                toms.push(TomAgent {
                    agent: cfg.agent,
                    config: *t,
                    belief,
                    hierarchy,
                    solves_reported: 0,
                });
                Slot::Tom(toms.len() - 1)
            }
            AgentKind::FixedLevel(k) => Slot::Fixed(
                fixed_ladder
                    .as_ref()
                    .expect("ladder exists when a fixed-level agent does")
                    .level_policy(*k, cfg.agent),
            ),
            AgentKind::Scripted(p) => Slot::Scripted(p),
        });
    }

    let mut master = ChaCha8Rng::seed_from_u64(options.seed);
    let mut rounds = Vec::with_capacity(options.rounds);
    let mut beliefs = Vec::new();
    for round in 1..=options.rounds {
        let mut tom_policies = Vec::with_capacity(toms.len());
        let mut lambdas = Vec::with_capacity(toms.len());
        for tom in toms.iter_mut() {
            let lambda = tom.belief.lambda_hat();
            tom.hierarchy.refresh(game, lambda)?;
            tom_policies.push(tom.hierarchy.own_best_response(lambda)?);
            lambdas.push(lambda);
        }
        let policies: Vec<&PolicyTable> = slots
            .iter()
            .map(|slot| match slot {
                Slot::Tom(t) => &tom_policies[*t],
                Slot::Fixed(p) | Slot::Scripted(p) => p,
            })
            .collect();
        let trace = run_round(
            game,
            &policies,
            options.horizon,
            game.initial_state(),
            master.next_u64(),
        )?;

        for (tom, lambda_used) in toms.iter_mut().zip(lambdas) {
            let mut inferred = vec![None; n];
            let mut observed = Vec::with_capacity(n - 1);
            for (opponent, slot) in inferred.iter_mut().enumerate() {
                if opponent == tom.agent {
                    continue;
                }
                let ladder = tom.hierarchy.ladder_of(opponent);
                let level = infer_level(&trace.episode_of(opponent), &ladder, tom.config.epsilon)?;
                *slot = Some(level);
                observed.push(level);
            }
            tom.belief.observe(&observed);
            let solves = tom.hierarchy.solve_count();
            beliefs.push(BeliefRecord {
                round,
                agent: tom.agent,
                lambda_used,
                inferred,
                posterior: tom.belief.posterior(),
                lambda_hat: tom.belief.lambda_hat(),
                solves_delta: solves - tom.solves_reported,
            });
            tom.solves_reported = solves;
        }
        rounds.push(trace);
    }

    let summary = configs
        .iter()
        .map(|cfg| {
            let returns: Vec<f64> = rounds
                .iter()
                .map(|r| discounted_return(r, cfg.agent, game.discount()))
                .collect();
            let mean = returns.iter().sum::<f64>() / returns.len() as f64;
            let tom = toms.iter().find(|t| t.agent == cfg.agent);
            AgentSummary {
                agent: cfg.agent,
                kind: kind_label(&cfg.kind),
                discounted_returns: returns,
                mean_discounted_return: mean,
                total_solves: tom.map(|t| t.hierarchy.solve_count()),
                final_posterior: tom.map(|t| t.belief.posterior()),
            }
        })
        .collect();

    Ok(Experiment {
        trace: Trace { rounds, beliefs },
        summary,
    })
}
