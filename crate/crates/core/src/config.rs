//! Experiment configuration: game sources, agent specs and output files.
//!
//! Agents are given on the command line as `<index>=<kind>`:
//!
//! ```text
//! 0=tom:singleton,K=2,a=2,b=1,eps=0.001   modeling agent (mode, depth, prior, floor)
//! 1=level:1                               fixed level from a singleton ladder
//! 1=scripted:H                            always plays action H (name or index)
//! ```
//!
//! The same schema is accepted as JSON through [`ExperimentConfig::from_json`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::GammaParams;
use crate::builtin::{builtin_game, BuiltinError};
use crate::game::{GameError, GameSpec, PolicyTable};
use crate::hierarchy::Mode;
use crate::mdp::SolverConfig;
use crate::sim::{
    run_experiment, AgentConfig, AgentKind, AgentSummary, Experiment, RunOptions, SimError,
    TomConfig,
};
use crate::trace::{write_beliefs_csv, write_steps_csv};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot access `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("{source_name}: {error}")]
    Game {
        source_name: String,
        error: GameError,
    },
    #[error(transparent)]
    Builtin(#[from] BuiltinError),
    #[error("bad agent spec `{spec}`: {reason}")]
    AgentSpec { spec: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl ConfigError {
    /// 1 for game validation failures, 2 for I/O, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Game { .. } => 1,
            ConfigError::Io { .. } => 2,
            _ => 3,
        }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        ConfigError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

const BUILTIN_PREFIX: &str = "builtin:";

fn read_game_text(source: &str) -> Result<Option<String>, ConfigError> {
    if source.starts_with(BUILTIN_PREFIX) {
        return Ok(None);
    }
    let path = Path::new(source);
    fs::read_to_string(path)
        .map(Some)
        .map_err(|e| ConfigError::io(path, e))
}

fn load_builtin(source: &str) -> Result<GameSpec, ConfigError> {
    let rest = &source[BUILTIN_PREFIX.len()..];
    let (name, params) = match rest.split_once(':') {
        Some((name, params)) => (name, Some(params)),
        None => (rest, None),
    };
    Ok(builtin_game(name, params)?)
}

/// Loads a game from `builtin:<name>[:<params>]` or a JSON file path and
/// requires it to validate.
pub fn load_game(source: &str) -> Result<GameSpec, ConfigError> {
    match read_game_text(source)? {
        None => load_builtin(source),
        Some(text) => GameSpec::parse(&text).map_err(|error| ConfigError::Game {
            source_name: source.to_string(),
            error,
        }),
    }
}

/// Like [`load_game`] but keeps numerically invalid games so they can be
/// reported.
pub fn load_game_unchecked(source: &str) -> Result<GameSpec, ConfigError> {
    match read_game_text(source)? {
        None => load_builtin(source),
        Some(text) => GameSpec::parse_unchecked(&text).map_err(|error| ConfigError::Game {
            source_name: source.to_string(),
            error,
        }),
    }
}

fn default_mode() -> Mode {
    Mode::Singleton
}
fn default_depth() -> usize {
    2
}
fn default_shape() -> f64 {
    GammaParams::default().shape()
}
fn default_rate() -> f64 {
    GammaParams::default().rate()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    Tom {
        agent: usize,
        #[serde(default = "default_mode")]
        mode: Mode,
        #[serde(default = "default_depth")]
        depth: usize,
        #[serde(default = "default_shape")]
        a: f64,
        #[serde(default = "default_rate")]
        b: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
    },
    Level {
        agent: usize,
        level: usize,
    },
    Scripted {
        agent: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probs: Option<Vec<Vec<f64>>>,
    },
}

impl AgentSpec {
    pub fn agent(&self) -> usize {
        match self {
            AgentSpec::Tom { agent, .. }
            | AgentSpec::Level { agent, .. }
            | AgentSpec::Scripted { agent, .. } => *agent,
        }
    }

    /// Parses the command-line form `<index>=<kind>[:<args>]`.
    pub fn parse_flag(spec: &str) -> Result<Self, ConfigError> {
        let bad = |reason: &str| ConfigError::AgentSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (index, rest) = spec
            .split_once('=')
            .ok_or_else(|| bad("expected <index>=<kind>"))?;
        let agent: usize = index
            .trim()
            .parse()
            .map_err(|_| bad("agent index is not a nonnegative integer"))?;
        let (kind, args) = match rest.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a)),
            None => (rest.trim(), None),
        };
        match kind {
            "tom" => {
                let mut mode = default_mode();
                let mut depth = default_depth();
                let mut a = default_shape();
                let mut b = default_rate();
                let mut epsilon = None;
                let mut parts = args.unwrap_or("").split(',').map(str::trim).peekable();
                if let Some(first) = parts.peek() {
                    if !first.contains('=') {
                        mode = match *first {
                            "singleton" => Mode::Singleton,
                            "mixed" => Mode::Mixed,
                            "" if args.is_none() => Mode::Singleton,
                            _ => return Err(bad("mode must be `singleton` or `mixed`")),
                        };
                        parts.next();
                    }
                }
                for part in parts {
                    let (key, value) = part
                        .split_once('=')
                        .ok_or_else(|| bad("expected key=value after the mode"))?;
                    let number = || -> Result<f64, ConfigError> {
                        value
                            .trim()
                            .parse()
                            .map_err(|_| bad("value is not a number"))
                    };
                    match key.trim() {
                        "K" | "k" | "depth" => {
                            depth = value
                                .trim()
                                .parse()
                                .map_err(|_| bad("depth is not an integer"))?
                        }
                        "a" => a = number()?,
                        "b" => b = number()?,
                        "eps" | "epsilon" => epsilon = Some(number()?),
                        _ => return Err(bad("unknown key (expected K, a, b or eps)")),
                    }
                }
                Ok(AgentSpec::Tom {
                    agent,
                    mode,
                    depth,
                    a,
                    b,
                    epsilon,
                })
            }
            "level" => {
                let level = args
                    .and_then(|l| l.trim().parse().ok())
                    .ok_or_else(|| bad("expected level:<k>"))?;
                Ok(AgentSpec::Level { agent, level })
            }
            "scripted" => {
                let action = args
                    .map(str::trim)
                    .filter(|a| !a.is_empty())
                    .ok_or_else(|| bad("expected scripted:<action>"))?;
                Ok(AgentSpec::Scripted {
                    agent,
                    action: Some(action.to_string()),
                    probs: None,
                })
            }
            _ => Err(bad("kind must be tom, level or scripted")),
        }
    }

    fn resolve(&self, game: &GameSpec, default_epsilon: f64) -> Result<AgentConfig, ConfigError> {
        let kind = match self {
            AgentSpec::Tom {
                mode,
                depth,
                a,
                b,
                epsilon,
                ..
            } => AgentKind::Tom(TomConfig {
                mode: *mode,
                depth: *depth,
                prior: GammaParams::new(*a, *b)
                    .map_err(|e| ConfigError::Invalid(format!("agent {}: {e}", self.agent())))?,
                epsilon: epsilon.unwrap_or(default_epsilon),
            }),
            AgentSpec::Level { level, .. } => AgentKind::FixedLevel(*level),
            AgentSpec::Scripted {
                agent,
                action,
                probs,
            } => {
                if *agent >= game.num_agents() {
                    return Err(SimError::Game(GameError::AgentOutOfRange(*agent)).into());
                }
                let table = match (action, probs) {
                    (Some(name), None) => {
                        let index = game
                            .action_index(*agent, name)
                            .or_else(|| name.parse().ok().filter(|&i| i < game.num_actions(*agent)))
                            .ok_or_else(|| {
                                ConfigError::Invalid(format!(
                                    "agent {agent}: unknown action `{name}`"
                                ))
                            })?;
                        PolicyTable::constant(game, *agent, index)
                    }
                    (None, Some(rows)) => PolicyTable::new(*agent, rows.clone()),
                    _ => {
                        return Err(ConfigError::Invalid(format!(
                            "agent {agent}: scripted agents need exactly one of `action` or `probs`"
                        )))
                    }
                };
                let table = table.map_err(|e| ConfigError::Invalid(e.to_string()))?;
                table
                    .check_against(game)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                AgentKind::Scripted(table)
            }
        };
        Ok(AgentConfig {
            agent: self.agent(),
            kind,
        })
    }
}

fn default_rounds() -> usize {
    10
}
fn default_horizon() -> usize {
    10
}
fn default_tol() -> f64 {
    SolverConfig::default().tol
}
fn default_max_iterations() -> usize {
    SolverConfig::default().max_iterations
}
fn default_epsilon() -> f64 {
    TomConfig::default().epsilon
}
fn default_depth_cap() -> usize {
    RunOptions::default().depth_cap
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `builtin:<name>[:<params>]` or a path to a game file.
    pub game: String,
    pub agents: Vec<AgentSpec>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the game's discount when set.
    #[serde(default)]
    pub discount: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Default likelihood floor for modeling agents without their own.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_depth_cap")]
    pub depth_cap: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(game: impl Into<String>, agents: Vec<AgentSpec>) -> Self {
        Self {
            game: game.into(),
            agents,
            rounds: default_rounds(),
            horizon: default_horizon(),
            seed: 0,
            discount: None,
            tol: default_tol(),
            max_iterations: default_max_iterations(),
            epsilon: default_epsilon(),
            depth_cap: default_depth_cap(),
            out_dir: default_out_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Range checks on the numeric settings.
    pub fn check(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        if self.rounds == 0 {
            return fail("rounds must be at least 1".into());
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iterations == 0 {
            return fail("max_iterations must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if let Some(g) = self.discount {
            if !(0.0..1.0).contains(&g) {
                return fail(format!("discount must lie in [0, 1), got {g}"));
            }
        }
        if self.agents.is_empty() {
            return fail("no agents configured".into());
        }
        Ok(())
    }

    /// Loads the game and converts the agent specs.
    pub fn resolve(&self) -> Result<(GameSpec, Vec<AgentConfig>, RunOptions), ConfigError> {
        self.check()?;
        let mut game = load_game(&self.game)?;
        if let Some(g) = self.discount {
            game = game.with_discount(g);
        }
        let agents = self
            .agents
            .iter()
            .map(|a| a.resolve(&game, self.epsilon))
            .collect::<Result<_, _>>()?;
        let options = RunOptions {
            rounds: self.rounds,
            horizon: self.horizon,
            seed: self.seed,
            solver: SolverConfig {
                tol: self.tol,
                max_iterations: self.max_iterations,
            },
            depth_cap: self.depth_cap,
        };
        Ok((game, agents, options))
    }

    /// Copy with every defaulted field spelled out, as written to the summary.
    pub fn resolved(&self, game: &GameSpec) -> Self {
        let mut out = self.clone();
        out.discount = Some(game.discount());
        for spec in &mut out.agents {
            if let AgentSpec::Tom { epsilon, .. } = spec {
                epsilon.get_or_insert(self.epsilon);
            }
        }
        out
    }

    pub fn run(&self) -> Result<(GameSpec, Experiment), ConfigError> {
        let (game, agents, options) = self.resolve()?;
        let exp = run_experiment(&game, &agents, &options)?;
        Ok((game, exp))
    }
}

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub config: ExperimentConfig,
    pub num_states: usize,
    pub num_agents: usize,
    pub agents: &'a [AgentSummary],
}

/// Writes `steps.csv`, `beliefs.csv` and `summary.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    game: &GameSpec,
    exp: &Experiment,
) -> Result<(), ConfigError> {
    fs::create_dir_all(dir).map_err(|e| ConfigError::io(dir, e))?;
    let open = |name: &str| {
        let path = dir.join(name);
        fs::File::create(&path)
            .map(std::io::BufWriter::new)
            .map_err(|e| ConfigError::io(&path, e))
    };
    write_steps_csv(game, &exp.trace, open("steps.csv")?)
        .map_err(|e| ConfigError::io(&dir.join("steps.csv"), e))?;
    write_beliefs_csv(game.num_agents(), &exp.trace, open("beliefs.csv")?)
        .map_err(|e| ConfigError::io(&dir.join("beliefs.csv"), e))?;
    let summary = Summary {
        config: config.resolved(game),
        num_states: game.num_states(),
        num_agents: game.num_agents(),
        agents: &exp.summary,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    let path = dir.join("summary.json");
    fs::write(&path, json).map_err(|e| ConfigError::io(&path, e))
}
