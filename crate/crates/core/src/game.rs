//! Finite stochastic games, stationary policies and opponent profiles.
//!
//! States and actions are interned to dense 0-based indices in declaration
//! order. Joint actions are encoded as a mixed-radix index with agent 0 the
//! most significant digit, so iterating joint indices in order enumerates
//! joint actions lexicographically.
//!
//! A transition row that is never specified is a deterministic self-loop and
//! a reward that is never specified is zero. The validation report counts the
//! defaulted rows so omissions stay visible.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::PROB_TOL;

/// Upper bound on `|S| * |A_1 x ... x A_n|`; keeps hostile inputs from
/// allocating unbounded tables.
pub const MAX_ROWS: usize = 1 << 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("game needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("`agents` is {agents} but {lists} action lists were given")]
    ActionListCount { agents: usize, lists: usize },
    #[error("no states declared")]
    NoStates,
    #[error("agent {0} has no actions")]
    NoActions(usize),
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("agent {agent}: duplicate action `{action}`")]
    DuplicateAction { agent: usize, action: String },
    #[error("game too large: more than {MAX_ROWS} (state, joint action) rows")]
    TooLarge,
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("agent {agent}: unknown action `{action}`")]
    UnknownAction { agent: usize, action: String },
    #[error("agent index {0} out of range")]
    AgentOutOfRange(usize),
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("agent {agent}: action index {action} out of range")]
    ActionOutOfRange { agent: usize, action: usize },
    #[error("joint action has {got} entries, expected {expected}")]
    JointArity { got: usize, expected: usize },
    #[error("duplicate transition entry for ({state}, [{joint}])")]
    DuplicateTransition { state: String, joint: String },
    #[error("duplicate successor `{successor}` in transition ({state}, [{joint}])")]
    DuplicateSuccessor {
        state: String,
        joint: String,
        successor: String,
    },
    #[error("duplicate reward entry for agent {agent} at ({state}, [{joint}])")]
    DuplicateReward {
        agent: usize,
        state: String,
        joint: String,
    },
    #[error("{0}")]
    Invalid(ValidationIssue),
    #[error("policy for agent {agent}: {reason}")]
    BadPolicy { agent: usize, reason: String },
    #[error("opponent profile for agent {agent}: {reason}")]
    BadProfile { agent: usize, reason: String },
}

impl From<serde_json::Error> for GameError {
    fn from(e: serde_json::Error) -> Self {
        GameError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// One broken invariant found by [`GameSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    MassMismatch {
        state: String,
        joint: String,
        mass: f64,
    },
    NegativeProbability {
        state: String,
        joint: String,
        successor: String,
        prob: f64,
    },
    NonFiniteProbability {
        state: String,
        joint: String,
        successor: String,
    },
    NonFiniteReward {
        agent: usize,
        state: String,
        joint: String,
    },
    DiscountOutOfRange(f64),
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::MassMismatch { state, joint, mass } => {
                write!(
                    f,
                    "transition ({state}, [{joint}]): distribution mass {mass}"
                )
            }
            ValidationIssue::NegativeProbability {
                state,
                joint,
                successor,
                prob,
            } => write!(
                f,
                "transition ({state}, [{joint}]): negative probability {prob} for `{successor}`"
            ),
            ValidationIssue::NonFiniteProbability {
                state,
                joint,
                successor,
            } => write!(
                f,
                "transition ({state}, [{joint}]): non-finite probability for `{successor}`"
            ),
            ValidationIssue::NonFiniteReward {
                agent,
                state,
                joint,
            } => write!(
                f,
                "reward of agent {agent} at ({state}, [{joint}]) is not finite"
            ),
            ValidationIssue::DiscountOutOfRange(g) => {
                write!(f, "discount {g} outside [0, 1)")
            }
        }
    }
}

/// Outcome of [`GameSpec::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub defaulted_rows: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "error: {issue}")?;
        }
        write!(
            f,
            "{} errors, {} defaulted rows",
            self.issues.len(),
            self.defaulted_rows
        )
    }
}

/// A finite stochastic game `<N, S, A, T, R>` with discount factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    states: Vec<String>,
    actions: Vec<Vec<String>>,
    strides: Vec<usize>,
    num_joint: usize,
    transitions: Vec<Vec<(usize, f64)>>,
    explicit: Vec<bool>,
    rewards: Vec<f64>,
    discount: f64,
    initial_state: usize,
}

impl GameSpec {
    /// Parses a game file and rejects it unless every invariant holds.
    pub fn parse(text: &str) -> Result<Self, GameError> {
        let game = Self::parse_unchecked(text)?;
        let report = game.validate();
        match report.issues.into_iter().next() {
            Some(issue) => Err(GameError::Invalid(issue)),
            None => Ok(game),
        }
    }

    /// Parses a game file, resolving identifiers but leaving numeric
    /// invariants (masses, signs, finiteness, discount) to [`Self::validate`].
    pub fn parse_unchecked(text: &str) -> Result<Self, GameError> {
        let raw: RawGame = serde_json::from_str(text)?;
        if raw.actions.len() != raw.agents {
            return Err(GameError::ActionListCount {
                agents: raw.agents,
                lists: raw.actions.len(),
            });
        }
        let mut builder = GameBuilder::new(raw.states, raw.actions)?;
        builder.set_discount(raw.discount);
        if let Some(name) = &raw.initial_state {
            let s = builder.state_index(name)?;
            builder.set_initial_state(s)?;
        }
        for t in &raw.transitions {
            let s = builder.state_index(&t.state)?;
            let joint = builder.joint_from_names(&t.joint_action)?;
            let mut dist = Vec::with_capacity(t.dist.len());
            for (succ, p) in &t.dist {
                dist.push((builder.state_index(succ)?, *p));
            }
            builder.set_transition(s, &joint, dist)?;
        }
        for r in &raw.rewards {
            let s = builder.state_index(&r.state)?;
            let joint = builder.joint_from_names(&r.joint_action)?;
            builder.set_reward(r.agent, s, &joint, r.value)?;
        }
        Ok(builder.build())
    }

    /// Canonical JSON form. Only explicitly specified transition rows and
    /// nonzero rewards are written, so parsing the output reproduces `self`.
    pub fn to_json(&self) -> String {
        let mut transitions = Vec::new();
        for s in 0..self.num_states() {
            for joint in 0..self.num_joint {
                let row = s * self.num_joint + joint;
                if !self.explicit[row] {
                    continue;
                }
                transitions.push(RawTransition {
                    state: self.states[s].clone(),
                    joint_action: self.joint_names(joint),
                    dist: self.transitions[row]
                        .iter()
                        .map(|&(t, p)| (self.states[t].clone(), p))
                        .collect(),
                });
            }
        }
        let mut rewards = Vec::new();
        for agent in 0..self.num_agents() {
            for s in 0..self.num_states() {
                for joint in 0..self.num_joint {
                    let value = self.reward(agent, s, joint);
                    if value != 0.0 {
                        rewards.push(RawReward {
                            agent,
                            state: self.states[s].clone(),
                            joint_action: self.joint_names(joint),
                            value,
                        });
                    }
                }
            }
        }
        let raw = RawGame {
            agents: self.num_agents(),
            states: self.states.clone(),
            actions: self.actions.clone(),
            transitions,
            rewards,
            discount: self.discount,
            initial_state: Some(self.states[self.initial_state].clone()),
        };
        serde_json::to_string_pretty(&raw).expect("game serializes")
    }

    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();
        if !(0.0..1.0).contains(&self.discount) {
            issues.push(ValidationIssue::DiscountOutOfRange(self.discount));
        }
        for s in 0..self.num_states() {
            for joint in 0..self.num_joint {
                let row = &self.transitions[s * self.num_joint + joint];
                let mut mass = 0.0;
                let mut row_ok = true;
                for &(succ, p) in row {
                    if !p.is_finite() {
                        issues.push(ValidationIssue::NonFiniteProbability {
                            state: self.states[s].clone(),
                            joint: self.joint_label(joint),
                            successor: self.states[succ].clone(),
                        });
                        row_ok = false;
                    } else if p < 0.0 {
                        issues.push(ValidationIssue::NegativeProbability {
                            state: self.states[s].clone(),
                            joint: self.joint_label(joint),
                            successor: self.states[succ].clone(),
                            prob: p,
                        });
                        row_ok = false;
                    }
                    mass += p;
                }
                if row_ok && (mass - 1.0).abs() > PROB_TOL {
                    issues.push(ValidationIssue::MassMismatch {
                        state: self.states[s].clone(),
                        joint: self.joint_label(joint),
                        mass,
                    });
                }
            }
        }
        for agent in 0..self.num_agents() {
            for s in 0..self.num_states() {
                for joint in 0..self.num_joint {
                    if !self.reward(agent, s, joint).is_finite() {
                        issues.push(ValidationIssue::NonFiniteReward {
                            agent,
                            state: self.states[s].clone(),
                            joint: self.joint_label(joint),
                        });
                    }
                }
            }
        }
        ValidationReport {
            issues,
            defaulted_rows: self.defaulted_rows(),
        }
    }

    pub fn num_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self, agent: usize) -> usize {
        self.actions[agent].len()
    }

    /// Size of the joint action space.
    pub fn num_joint(&self) -> usize {
        self.num_joint
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s]
    }

    pub fn action_name(&self, agent: usize, a: usize) -> &str {
        &self.actions[agent][a]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_index(&self, agent: usize, name: &str) -> Option<usize> {
        self.actions.get(agent)?.iter().position(|a| a == name)
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Returns a copy of the game with a different discount factor.
    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn defaulted_rows(&self) -> usize {
        self.explicit.iter().filter(|e| !**e).count()
    }

    /// Stride of `agent`'s digit in the joint action index.
    pub fn stride(&self, agent: usize) -> usize {
        self.strides[agent]
    }

    pub fn joint_index(&self, actions: &[usize]) -> usize {
        debug_assert_eq!(actions.len(), self.num_agents());
        actions
            .iter()
            .zip(&self.strides)
            .map(|(a, stride)| a * stride)
            .sum()
    }

    pub fn decode_joint(&self, joint: usize) -> Vec<usize> {
        (0..self.num_agents())
            .map(|i| (joint / self.strides[i]) % self.actions[i].len())
            .collect()
    }

    /// Sparse successor distribution `T(. | s, joint)`, sorted by state.
    pub fn transition(&self, s: usize, joint: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.num_joint + joint]
    }

    pub fn reward(&self, agent: usize, s: usize, joint: usize) -> f64 {
        self.rewards[(agent * self.num_states() + s) * self.num_joint + joint]
    }

    /// `(min, max)` of agent's reward table.
    pub fn reward_range(&self, agent: usize) -> (f64, f64) {
        let n = self.num_states() * self.num_joint;
        self.rewards[agent * n..(agent + 1) * n]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            })
    }

    fn joint_names(&self, joint: usize) -> Vec<String> {
        self.decode_joint(joint)
            .iter()
            .enumerate()
            .map(|(i, &a)| self.actions[i][a].clone())
            .collect()
    }

    fn joint_label(&self, joint: usize) -> String {
        self.joint_names(joint).join(", ")
    }
}

/// Incremental constructor used by the parser, the built-in games and tests.
#[derive(Debug, Clone)]
pub struct GameBuilder {
    states: Vec<String>,
    actions: Vec<Vec<String>>,
    state_lookup: HashMap<String, usize>,
    action_lookup: Vec<HashMap<String, usize>>,
    strides: Vec<usize>,
    num_joint: usize,
    transitions: Vec<Option<Vec<(usize, f64)>>>,
    rewards: Vec<f64>,
    reward_set: Vec<bool>,
    discount: f64,
    initial_state: usize,
}

impl GameBuilder {
    pub fn new(states: Vec<String>, actions: Vec<Vec<String>>) -> Result<Self, GameError> {
        if actions.len() < 2 {
            return Err(GameError::TooFewAgents(actions.len()));
        }
        if states.is_empty() {
            return Err(GameError::NoStates);
        }
        let mut state_lookup = HashMap::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            if state_lookup.insert(s.clone(), i).is_some() {
                return Err(GameError::DuplicateState(s.clone()));
            }
        }
        let mut action_lookup = Vec::with_capacity(actions.len());
        for (agent, list) in actions.iter().enumerate() {
            if list.is_empty() {
                return Err(GameError::NoActions(agent));
            }
            let mut lookup = HashMap::with_capacity(list.len());
            for (i, a) in list.iter().enumerate() {
                if lookup.insert(a.clone(), i).is_some() {
                    return Err(GameError::DuplicateAction {
                        agent,
                        action: a.clone(),
                    });
                }
            }
            action_lookup.push(lookup);
        }
        let mut strides = vec![0; actions.len()];
        let mut num_joint: usize = 1;
        for agent in (0..actions.len()).rev() {
            strides[agent] = num_joint;
            num_joint = num_joint
                .checked_mul(actions[agent].len())
                .filter(|&j| j <= MAX_ROWS)
                .ok_or(GameError::TooLarge)?;
        }
        let rows = states
            .len()
            .checked_mul(num_joint)
            .filter(|&r| r <= MAX_ROWS)
            .ok_or(GameError::TooLarge)?;
        let reward_cells = rows
            .checked_mul(actions.len())
            .filter(|&r| r <= MAX_ROWS)
            .ok_or(GameError::TooLarge)?;
        Ok(Self {
            states,
            actions,
            state_lookup,
            action_lookup,
            strides,
            num_joint,
            transitions: vec![None; rows],
            rewards: vec![0.0; reward_cells],
            reward_set: vec![false; reward_cells],
            discount: 0.9,
            initial_state: 0,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.actions.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_joint(&self) -> usize {
        self.num_joint
    }

    pub fn decode_joint(&self, joint: usize) -> Vec<usize> {
        (0..self.num_agents())
            .map(|i| (joint / self.strides[i]) % self.actions[i].len())
            .collect()
    }

    pub fn state_index(&self, name: &str) -> Result<usize, GameError> {
        self.state_lookup
            .get(name)
            .copied()
            .ok_or_else(|| GameError::UnknownState(name.to_string()))
    }

    pub fn joint_from_names(&self, names: &[String]) -> Result<Vec<usize>, GameError> {
        if names.len() != self.num_agents() {
            return Err(GameError::JointArity {
                got: names.len(),
                expected: self.num_agents(),
            });
        }
        names
            .iter()
            .enumerate()
            .map(|(agent, name)| {
                self.action_lookup[agent].get(name).copied().ok_or_else(|| {
                    GameError::UnknownAction {
                        agent,
                        action: name.clone(),
                    }
                })
            })
            .collect()
    }

    pub fn set_discount(&mut self, discount: f64) -> &mut Self {
        self.discount = discount;
        self
    }

    pub fn set_initial_state(&mut self, s: usize) -> Result<&mut Self, GameError> {
        if s >= self.num_states() {
            return Err(GameError::StateOutOfRange(s));
        }
        self.initial_state = s;
        Ok(self)
    }

    fn joint_of(&self, joint: &[usize]) -> Result<usize, GameError> {
        if joint.len() != self.num_agents() {
            return Err(GameError::JointArity {
                got: joint.len(),
                expected: self.num_agents(),
            });
        }
        let mut idx = 0;
        for (agent, &a) in joint.iter().enumerate() {
            if a >= self.actions[agent].len() {
                return Err(GameError::ActionOutOfRange { agent, action: a });
            }
            idx += a * self.strides[agent];
        }
        Ok(idx)
    }

    fn joint_label(&self, joint: &[usize]) -> String {
        joint
            .iter()
            .enumerate()
            .map(|(i, &a)| self.actions[i][a].as_str())
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Sets `T(. | s, joint)`. Entries are stored sorted by successor.
    pub fn set_transition(
        &mut self,
        s: usize,
        joint: &[usize],
        mut dist: Vec<(usize, f64)>,
    ) -> Result<&mut Self, GameError> {
        if s >= self.num_states() {
            return Err(GameError::StateOutOfRange(s));
        }
        let j = self.joint_of(joint)?;
        if let Some(&(t, _)) = dist.iter().find(|(t, _)| *t >= self.num_states()) {
            return Err(GameError::StateOutOfRange(t));
        }
        let row = s * self.num_joint + j;
        if self.transitions[row].is_some() {
            return Err(GameError::DuplicateTransition {
                state: self.states[s].clone(),
                joint: self.joint_label(joint),
            });
        }
        dist.sort_by_key(|&(t, _)| t);
        if let Some(w) = dist.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(GameError::DuplicateSuccessor {
                state: self.states[s].clone(),
                joint: self.joint_label(joint),
                successor: self.states[w[0].0].clone(),
            });
        }
        self.transitions[row] = Some(dist);
        Ok(self)
    }

    pub fn set_reward(
        &mut self,
        agent: usize,
        s: usize,
        joint: &[usize],
        value: f64,
    ) -> Result<&mut Self, GameError> {
        if agent >= self.num_agents() {
            return Err(GameError::AgentOutOfRange(agent));
        }
        if s >= self.num_states() {
            return Err(GameError::StateOutOfRange(s));
        }
        let j = self.joint_of(joint)?;
        let cell = (agent * self.num_states() + s) * self.num_joint + j;
        if self.reward_set[cell] {
            return Err(GameError::DuplicateReward {
                agent,
                state: self.states[s].clone(),
                joint: self.joint_label(joint),
            });
        }
        self.reward_set[cell] = true;
        self.rewards[cell] = value;
        Ok(self)
    }

    /// Finishes construction; unspecified rows become self-loops.
    pub fn build(self) -> GameSpec {
        let num_joint = self.num_joint;
        let explicit = self.transitions.iter().map(Option::is_some).collect();
        let transitions = self
            .transitions
            .into_iter()
            .enumerate()
            .map(|(row, t)| t.unwrap_or_else(|| vec![(row / num_joint, 1.0)]))
            .collect();
        GameSpec {
            states: self.states,
            actions: self.actions,
            strides: self.strides,
            num_joint,
            transitions,
            explicit,
            rewards: self.rewards,
            discount: self.discount,
            initial_state: self.initial_state,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGame {
    agents: usize,
    states: Vec<String>,
    actions: Vec<Vec<String>>,
    #[serde(default)]
    transitions: Vec<RawTransition>,
    #[serde(default)]
    rewards: Vec<RawReward>,
    discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_state: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransition {
    state: String,
    joint_action: Vec<String>,
    dist: Vec<(String, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReward {
    agent: usize,
    state: String,
    joint_action: Vec<String>,
    value: f64,
}

/// Stationary policy `pi_i: S -> Delta(A_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct PolicyTable {
    agent: usize,
    probs: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawPolicy {
    agent: usize,
    probs: Vec<Vec<f64>>,
}

impl TryFrom<RawPolicy> for PolicyTable {
    type Error = GameError;

    fn try_from(raw: RawPolicy) -> Result<Self, Self::Error> {
        PolicyTable::new(raw.agent, raw.probs)
    }
}

impl PolicyTable {
    /// Checks that every row is a probability vector.
    pub fn new(agent: usize, probs: Vec<Vec<f64>>) -> Result<Self, GameError> {
        let bad = |reason: String| GameError::BadPolicy { agent, reason };
        if probs.is_empty() {
            return Err(bad("no states".into()));
        }
        let width = probs[0].len();
        for (s, row) in probs.iter().enumerate() {
            if row.is_empty() || row.len() != width {
                return Err(bad(format!("state {s}: row has {} entries", row.len())));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(bad(format!(
                    "state {s}: negative or non-finite probability"
                )));
            }
            let mass: f64 = row.iter().sum();
            if (mass - 1.0).abs() > PROB_TOL {
                return Err(bad(format!("state {s}: mass {mass}")));
            }
        }
        Ok(Self { agent, probs })
    }

    pub fn uniform(game: &GameSpec, agent: usize) -> Self {
        let n = game.num_actions(agent);
        Self {
            agent,
            probs: vec![vec![1.0 / n as f64; n]; game.num_states()],
        }
    }

    /// Pure policy choosing `choice[s]` in state `s`.
    pub fn deterministic(
        game: &GameSpec,
        agent: usize,
        choice: &[usize],
    ) -> Result<Self, GameError> {
        if agent >= game.num_agents() {
            return Err(GameError::AgentOutOfRange(agent));
        }
        if choice.len() != game.num_states() {
            return Err(GameError::BadPolicy {
                agent,
                reason: format!("{} choices for {} states", choice.len(), game.num_states()),
            });
        }
        let n = game.num_actions(agent);
        let probs = choice
            .iter()
            .map(|&a| {
                if a >= n {
                    return Err(GameError::ActionOutOfRange { agent, action: a });
                }
                let mut row = vec![0.0; n];
                row[a] = 1.0;
                Ok(row)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { agent, probs })
    }

    /// Pure policy playing `action` everywhere.
    pub fn constant(game: &GameSpec, agent: usize, action: usize) -> Result<Self, GameError> {
        Self::deterministic(game, agent, &vec![action; game.num_states()])
    }

    /// Confirms the table covers the game's states and the agent's actions.
    pub fn check_against(&self, game: &GameSpec) -> Result<(), GameError> {
        if self.agent >= game.num_agents() {
            return Err(GameError::AgentOutOfRange(self.agent));
        }
        if self.probs.len() != game.num_states() {
            return Err(GameError::BadPolicy {
                agent: self.agent,
                reason: format!(
                    "defined on {} states, game has {}",
                    self.probs.len(),
                    game.num_states()
                ),
            });
        }
        let n = game.num_actions(self.agent);
        if self.num_actions() != n {
            return Err(GameError::BadPolicy {
                agent: self.agent,
                reason: format!("{} actions, game has {n}", self.num_actions()),
            });
        }
        Ok(())
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s][a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// The action played with certainty in `s`, if the row is pure.
    pub fn pure_action(&self, s: usize) -> Option<usize> {
        let row = &self.probs[s];
        row.iter().position(|&p| p == 1.0)
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.num_states()).all(|s| self.pure_action(s).is_some())
    }
}

/// Independent product of the opponents' policies, as seen by one agent.
///
/// Per state, `joint[s][o]` is the probability of the opponents' joint action
/// with mixed-radix index `o` over the opponents in increasing agent order.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentProfile {
    agent: usize,
    opponents: Vec<usize>,
    radix: Vec<usize>,
    joint: Vec<Vec<f64>>,
}

impl OpponentProfile {
    /// The agent facing this profile.
    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn opponents(&self) -> &[usize] {
        &self.opponents
    }

    pub fn num_states(&self) -> usize {
        self.joint.len()
    }

    pub fn num_opponent_joint(&self) -> usize {
        self.radix.iter().product()
    }

    pub fn prob(&self, s: usize, opp_joint: usize) -> f64 {
        self.joint[s][opp_joint]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.joint[s]
    }

    /// Opponent actions encoded by `opp_joint`, in `opponents()` order.
    pub fn decode(&self, mut opp_joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.radix.len()];
        for k in (0..self.radix.len()).rev() {
            out[k] = opp_joint % self.radix[k];
            opp_joint /= self.radix[k];
        }
        out
    }

    /// Full joint index of `(own_action, opponents' actions)`.
    pub fn full_joint(&self, game: &GameSpec, own_action: usize, opp_joint: usize) -> usize {
        let mut idx = own_action * game.stride(self.agent);
        for (k, a) in self.decode(opp_joint).into_iter().enumerate() {
            idx += a * game.stride(self.opponents[k]);
        }
        idx
    }
}

/// Builds `pi_{-j}` as the product of one policy per agent other than `j`.
/// Policies may be given in any order.
pub fn opponent_product(
    game: &GameSpec,
    j: usize,
    policies: &[&PolicyTable],
) -> Result<OpponentProfile, GameError> {
    if j >= game.num_agents() {
        return Err(GameError::AgentOutOfRange(j));
    }
    let bad = |reason: String| GameError::BadProfile { agent: j, reason };
    let mut slots: Vec<Option<&PolicyTable>> = vec![None; game.num_agents()];
    for p in policies {
        let i = p.agent();
        if i == j {
            return Err(bad(format!("policy for agent {j} itself")));
        }
        if i >= game.num_agents() {
            return Err(GameError::AgentOutOfRange(i));
        }
        if slots[i].is_some() {
            return Err(bad(format!("two policies for agent {i}")));
        }
        p.check_against(game)?;
        slots[i] = Some(p);
    }
    let mut opponents = Vec::new();
    let mut tables = Vec::new();
    for (i, slot) in slots.iter().enumerate() {
        if i == j {
            continue;
        }
        match slot {
            Some(p) => {
                opponents.push(i);
                tables.push(*p);
            }
            None => return Err(bad(format!("missing policy for agent {i}"))),
        }
    }
    let radix: Vec<usize> = opponents.iter().map(|&i| game.num_actions(i)).collect();
    let joint = (0..game.num_states())
        .map(|s| {
            let mut dist = vec![1.0];
            for table in &tables {
                let row = table.row(s);
                let mut next = Vec::with_capacity(dist.len() * row.len());
                for &p in &dist {
                    for &q in row {
                        next.push(p * q);
                    }
                }
                dist = next;
            }
            dist
        })
        .collect();
    Ok(OpponentProfile {
        agent: j,
        opponents,
        radix,
        joint,
    })
}
