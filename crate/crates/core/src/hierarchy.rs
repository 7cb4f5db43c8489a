//! The level-k strategy ladder.
//!
//! Level 0 is a fixed rule (uniform by default). Every agent's level-`k+1`
//! policy best responds to the other agents playing lower levels:
//!
//! - [`Mode::Singleton`]: against everyone at level `k`, i.e. greedy on
//!   `Q*` of `M(pi_{-i}|k)`.
//! - [`Mode::Mixed`]: against the truncated Poisson mixture over levels
//!   `0..=k`, via QMDP over the per-level `Q*` functions. The ladder depends
//!   on `lambda` and is rebuilt whenever the belief moves.
//!
//! Building depth `K` for `n` agents takes exactly `n * K` MDP solves. The
//! owner is taken to sit at level `K`, so its own best response mixes the
//! opponents' levels `0..K` and reuses the owner's ladder solves.

use serde::Serialize;
use thiserror::Error;

use crate::belief::{truncated_level_weights, BeliefError};
use crate::game::{opponent_product, GameError, GameSpec, PolicyTable};
use crate::mdp::{
    greedy_policy, induce_mdp, qmdp_policy, solve_value_iteration, MdpError, QFunction,
    SolverConfig,
};

/// Tolerance when matching a query rate against the rate a mixed ladder was
/// built with.
pub const LAMBDA_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("agent index {0} out of range")]
    AgentOutOfRange(usize),
    #[error("level-0 rules: expected one policy per agent in agent order")]
    Level0Mismatch,
    #[error(
        "mixed hierarchy built for lambda={built} queried with lambda={requested}; refresh first"
    )]
    Stale { built: f64, requested: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Singleton,
    Mixed,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Singleton => "singleton",
            Mode::Mixed => "mixed",
        })
    }
}

/// Uniform level-0 policy for `agent`.
pub fn level0_policy(game: &GameSpec, agent: usize) -> PolicyTable {
    PolicyTable::uniform(game, agent)
}

/// Accepts a rule-based level-0 policy after checking it fits the game.
pub fn level0_from_rule(game: &GameSpec, rule: PolicyTable) -> Result<PolicyTable, GameError> {
    rule.check_against(game)?;
    Ok(rule)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    owner: usize,
    mode: Mode,
    depth: usize,
    /// `levels[k][i]` is agent `i`'s level-`k` policy.
    levels: Vec<Vec<PolicyTable>>,
    /// `q_ladder[i][k]` is `Q*` of `M(pi_{-i}|k)` for `k < depth`.
    q_ladder: Vec<Vec<QFunction>>,
    built_with_lambda: Option<f64>,
    solve_count: usize,
    solver: SolverConfig,
}

/// Implementation 1 ladder with uniform level 0.
pub fn build_singleton(
    game: &GameSpec,
    owner: usize,
    depth: usize,
    solver: &SolverConfig,
) -> Result<Hierarchy, HierarchyError> {
    Hierarchy::build(game, owner, Mode::Singleton, depth, 0.0, None, solver)
}

/// Implementation 2 ladder with uniform level 0.
pub fn build_mixed(
    game: &GameSpec,
    owner: usize,
    depth: usize,
    lambda: f64,
    solver: &SolverConfig,
) -> Result<Hierarchy, HierarchyError> {
    Hierarchy::build(game, owner, Mode::Mixed, depth, lambda, None, solver)
}

impl Hierarchy {
    /// General constructor. `level0` overrides the uniform rule with one
    /// policy per agent; `lambda` is ignored in singleton mode.
    pub fn build(
        game: &GameSpec,
        owner: usize,
        mode: Mode,
        depth: usize,
        lambda: f64,
        level0: Option<Vec<PolicyTable>>,
        solver: &SolverConfig,
    ) -> Result<Self, HierarchyError> {
        if owner >= game.num_agents() {
            return Err(HierarchyError::AgentOutOfRange(owner));
        }
        let base = match level0 {
            Some(rules) => {
                if rules.len() != game.num_agents()
                    || rules.iter().enumerate().any(|(i, p)| p.agent() != i)
                {
                    return Err(HierarchyError::Level0Mismatch);
                }
                rules
                    .into_iter()
                    .map(|p| level0_from_rule(game, p))
                    .collect::<Result<_, _>>()?
            }
            None => (0..game.num_agents())
                .map(|i| level0_policy(game, i))
                .collect(),
        };
        if mode == Mode::Mixed {
            truncated_level_weights(lambda, 0)?;
        }
        let mut h = Self {
            owner,
            mode,
            depth,
            levels: vec![base],
            q_ladder: vec![Vec::with_capacity(depth); game.num_agents()],
            built_with_lambda: (mode == Mode::Mixed).then_some(lambda),
            solve_count: 0,
            solver: *solver,
        };
        h.extend_levels(game, lambda)?;
        Ok(h)
    }

    fn extend_levels(&mut self, game: &GameSpec, lambda: f64) -> Result<(), HierarchyError> {
        let n = game.num_agents();
        for k in 1..=self.depth {
            let below = &self.levels[k - 1];
            for i in 0..n {
                let others: Vec<&PolicyTable> = below.iter().filter(|p| p.agent() != i).collect();
                let profile = opponent_product(game, i, &others)?;
                let mdp = induce_mdp(game, i, &profile)?;
                let q = solve_value_iteration(&mdp, &self.solver)?;
                self.solve_count += 1;
                self.q_ladder[i].push(q);
            }
            let next = match self.mode {
                Mode::Singleton => self
                    .q_ladder
                    .iter()
                    .map(|qs| greedy_policy(&qs[k - 1]))
                    .collect(),
                Mode::Mixed => {
                    let weights = truncated_level_weights(lambda, k - 1)?;
                    self.q_ladder
                        .iter()
                        .map(|qs| {
                            let mix: Vec<(f64, &QFunction)> =
                                weights.iter().copied().zip(qs.iter()).collect();
                            qmdp_policy(&mix)
                        })
                        .collect::<Result<Vec<_>, _>>()?
                }
            };
            self.levels.push(next);
        }
        Ok(())
    }

    /// Brings the ladder in line with a new rate estimate. Singleton ladders
    /// never change; mixed ladders are rebuilt from level 1 up, costing
    /// another `n * K` solves.
    pub fn refresh(&mut self, game: &GameSpec, lambda: f64) -> Result<(), HierarchyError> {
        if self.mode == Mode::Singleton {
            return Ok(());
        }
        truncated_level_weights(lambda, 0)?;
        self.levels.truncate(1);
        self.q_ladder.iter_mut().for_each(Vec::clear);
        self.built_with_lambda = Some(lambda);
        self.extend_levels(game, lambda)
    }

    /// The owner's QMDP response to opponents spread over levels `0..K` with
    /// truncated Poisson weights at `lambda`. With `K = 0` there is nothing
    /// below the owner and it plays its level-0 rule.
    pub fn own_best_response(&self, lambda: f64) -> Result<PolicyTable, HierarchyError> {
        if let Some(built) = self.built_with_lambda {
            if (built - lambda).abs() > LAMBDA_MATCH_TOL {
                return Err(HierarchyError::Stale {
                    built,
                    requested: lambda,
                });
            }
        }
        if self.depth == 0 {
            truncated_level_weights(lambda, 0)?;
            return Ok(self.levels[0][self.owner].clone());
        }
        let weights = truncated_level_weights(lambda, self.depth - 1)?;
        let mix: Vec<(f64, &QFunction)> =
            weights.iter().copied().zip(self.q_cache().iter()).collect();
        Ok(qmdp_policy(&mix)?)
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_agents(&self) -> usize {
        self.q_ladder.len()
    }

    pub fn built_with_lambda(&self) -> Option<f64> {
        self.built_with_lambda
    }

    /// Cumulative number of MDP solves, across rebuilds.
    pub fn solve_count(&self) -> usize {
        self.solve_count
    }

    pub fn level_policy(&self, level: usize, agent: usize) -> &PolicyTable {
        &self.levels[level][agent]
    }

    /// All agents' policies at `level`.
    pub fn level(&self, level: usize) -> &[PolicyTable] {
        &self.levels[level]
    }

    /// `agent`'s policies at levels `0..=depth`.
    pub fn ladder_of(&self, agent: usize) -> Vec<&PolicyTable> {
        self.levels.iter().map(|l| &l[agent]).collect()
    }

    /// The owner's `Q*` against each opponent level `0..K`.
    pub fn q_cache(&self) -> &[QFunction] {
        &self.q_ladder[self.owner]
    }

    pub fn q_ladder(&self, agent: usize) -> &[QFunction] {
        &self.q_ladder[agent]
    }

    pub fn dump(&self, game: &GameSpec) -> HierarchyDump {
        HierarchyDump {
            owner: self.owner,
            mode: self.mode,
            depth: self.depth,
            lambda: self.built_with_lambda,
            solve_count: self.solve_count,
            states: (0..game.num_states())
                .map(|s| game.state_name(s).to_string())
                .collect(),
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(level, policies)| LevelDump {
                    level,
                    agents: policies
                        .iter()
                        .map(|p| AgentDump {
                            agent: p.agent(),
                            actions: (0..p.num_actions())
                                .map(|a| game.action_name(p.agent(), a).to_string())
                                .collect(),
                            probs: p.rows().to_vec(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// JSON-friendly view of a hierarchy for debugging and golden tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyDump {
    pub owner: usize,
    pub mode: Mode,
    pub depth: usize,
    pub lambda: Option<f64>,
    pub solve_count: usize,
    pub states: Vec<String>,
    pub levels: Vec<LevelDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDump {
    pub level: usize,
    pub agents: Vec<AgentDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentDump {
    pub agent: usize,
    pub actions: Vec<String>,
    pub probs: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn uniform_level0() {
        let g = builtin::gridworld_chase(2, 2).unwrap();
        assert!(level0_policy(&g, 0).rows().iter().all(|r| r == &[0.2; 5]));
        let mut b = crate::game::GameBuilder::new(
            vec!["s".into()],
            vec![
                vec!["a".into(), "b".into(), "c".into()],
                vec!["only".into()],
            ],
        )
        .unwrap();
        b.set_discount(0.5);
        let g = b.build();
        assert_eq!(level0_policy(&g, 0).row(0), &[1.0 / 3.0; 3]);
        assert_eq!(level0_policy(&g, 1).row(0), &[1.0]);
        let rule = PolicyTable::constant(&g, 0, 2).unwrap();
        assert_eq!(level0_from_rule(&g, rule.clone()).unwrap(), rule);
    }

    #[test]
    fn coordination_singleton_ladder_plays_a() {
        let g = builtin::coordination();
        let h = build_singleton(&g, 0, 2, &cfg()).unwrap();
        assert_eq!(h.solve_count(), 4);
        for k in 1..=2 {
            for i in 0..2 {
                assert_eq!(h.level_policy(k, i).pure_action(0), Some(0));
            }
        }
        let br = h.own_best_response(1.0).unwrap();
        assert_eq!(br.pure_action(0), Some(0));
    }

    #[test]
    fn depth_zero_has_no_solves() {
        let g = builtin::coordination();
        let h = build_singleton(&g, 1, 0, &cfg()).unwrap();
        assert_eq!(h.solve_count(), 0);
        assert_eq!(h.levels.len(), 1);
        assert_eq!(h.own_best_response(3.0).unwrap(), level0_policy(&g, 1));
    }

    #[test]
    fn pennies_level1_breaks_tie_low() {
        let g = builtin::matching_pennies();
        let h = build_singleton(&g, 0, 1, &cfg()).unwrap();
        assert_eq!(h.q_cache()[0].get(0, 0), 0.0);
        assert_eq!(h.q_cache()[0].get(0, 1), 0.0);
        assert_eq!(h.level_policy(1, 0).pure_action(0), Some(0));
    }

    #[test]
    fn mixed_level2_uses_half_weights() {
        let g = builtin::coordination();
        let h = build_mixed(&g, 0, 2, 1.0, &cfg()).unwrap();
        let qs = h.q_cache();
        let manual: Vec<f64> = (0..2)
            .map(|a| 0.5 * qs[0].get(0, a) + 0.5 * qs[1].get(0, a))
            .collect();
        assert!(manual[0] > manual[1]);
        assert_eq!(h.level_policy(2, 0).pure_action(0), Some(0));
        assert_eq!(h.level_policy(2, 1).pure_action(0), Some(0));
    }

    #[test]
    fn stale_mixed_query_rejected() {
        let g = builtin::coordination();
        let h = build_mixed(&g, 0, 2, 1.0, &cfg()).unwrap();
        assert_eq!(
            h.own_best_response(2.0),
            Err(HierarchyError::Stale {
                built: 1.0,
                requested: 2.0
            })
        );
        assert!(h.own_best_response(1.0).is_ok());
    }

    #[test]
    fn refresh_counts() {
        let g = builtin::coordination();
        let mut s = build_singleton(&g, 0, 3, &cfg()).unwrap();
        let frozen = s.clone();
        for r in 0..5 {
            s.refresh(&g, 0.5 + r as f64).unwrap();
        }
        assert_eq!(s, frozen);
        assert_eq!(s.solve_count(), 6);

        let mut m = build_mixed(&g, 0, 3, 2.0, &cfg()).unwrap();
        assert_eq!(m.solve_count(), 6);
        for r in 0..5 {
            m.refresh(&g, 0.5 + r as f64).unwrap();
        }
        assert_eq!(m.solve_count(), 36);
        assert_eq!(m.built_with_lambda(), Some(4.5));

        let mut z = build_mixed(&g, 0, 0, 2.0, &cfg()).unwrap();
        let before = z.levels.clone();
        z.refresh(&g, 9.0).unwrap();
        assert_eq!(z.levels, before);
        assert_eq!(z.solve_count(), 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = builtin::coordination();
        assert_eq!(
            build_singleton(&g, 2, 1, &cfg()),
            Err(HierarchyError::AgentOutOfRange(2))
        );
        assert!(matches!(
            build_mixed(&g, 0, 1, -1.0, &cfg()),
            Err(HierarchyError::Belief(_))
        ));
        let wrong_order = vec![level0_policy(&g, 1), level0_policy(&g, 0)];
        assert_eq!(
            Hierarchy::build(&g, 0, Mode::Singleton, 1, 0.0, Some(wrong_order), &cfg()),
            Err(HierarchyError::Level0Mismatch)
        );
    }

    #[test]
    fn custom_level0_drives_ladder() {
        let g = builtin::coordination();
        let rules = vec![
            PolicyTable::constant(&g, 0, 1).unwrap(),
            PolicyTable::constant(&g, 1, 1).unwrap(),
        ];
        let h = Hierarchy::build(&g, 0, Mode::Singleton, 1, 0.0, Some(rules), &cfg()).unwrap();
        // against B, matching B pays 1 and A pays 0
        assert_eq!(h.level_policy(1, 0).pure_action(0), Some(1));
    }

    #[test]
    fn dump_serializes() {
        let g = builtin::coordination();
        let h = build_mixed(&g, 1, 1, 1.0, &cfg()).unwrap();
        let json = serde_json::to_value(h.dump(&g)).unwrap();
        assert_eq!(json["mode"], "mixed");
        assert_eq!(json["levels"][1]["agents"][0]["probs"][0][0], 1.0);
        assert_eq!(json["levels"][0]["agents"][1]["actions"][1], "B");
    }
}
