//! Cognitive-hierarchy opponent modeling for finite stochastic games.
//!
//! Agents keep a Gamma posterior over the mean reasoning level of the
//! population, turn it into truncated Poisson weights over a level-k ladder of
//! stationary strategies, and best respond to that mixture with QMDP over the
//! Q-functions of the induced single-agent MDPs.
//!
//! Module map:
//! - [`game`]: stochastic game specs, policies and opponent profiles.
//! - [`mdp`]: induced MDPs, value iteration, greedy and QMDP policies.
//! - [`belief`]: Poisson level weights, Gamma-Poisson updates, level inference.
//! - [`hierarchy`]: the level ladder in singleton and mixed construction modes.
//! - [`sim`]: repeated-round experiments with belief bookkeeping.
//! - [`builtin`], [`config`], [`trace`]: example games, experiment config and
//!   output files.

pub mod belief;
pub mod builtin;
pub mod config;
pub mod game;
pub mod hierarchy;
pub mod mdp;
pub mod sim;
pub mod trace;

pub use belief::{BeliefState, GammaParams};
pub use game::{GameSpec, OpponentProfile, PolicyTable, ValidationReport};
pub use hierarchy::{Hierarchy, Mode};
pub use mdp::{InducedMdp, QFunction, SolverConfig};
pub use sim::{AgentConfig, AgentKind, Experiment, RunOptions, Trace};

/// Tolerance for "sums to one" checks on probability vectors.
pub const PROB_TOL: f64 = 1e-9;
