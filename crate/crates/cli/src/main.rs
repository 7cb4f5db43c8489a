//! `tomsim`: run cognitive-hierarchy agents in finite stochastic games.
//!
//! Exit codes: 0 ok, 1 game validation failure, 2 I/O failure, 3 bad
//! configuration or arguments.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tom_core::config::{
    load_game, load_game_unchecked, write_outputs, AgentSpec, ConfigError, ExperimentConfig,
};
use tom_core::hierarchy::Mode;
use tom_core::{Hierarchy, SolverConfig};

#[derive(Parser)]
#[command(
    name = "tomsim",
    version,
    about = "Cognitive-hierarchy agents in stochastic games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write steps.csv, beliefs.csv and summary.json.
    Run(RunArgs),
    /// Print the validation report of a game file or builtin.
    Validate {
        /// Game file path or `builtin:<name>[:<params>]`.
        game: String,
    },
    /// Print the JSON description of a builtin game.
    Builtin {
        /// matching_pennies, coordination or gridworld_chase.
        name: String,
        /// Parameters such as `4x3` for gridworld_chase.
        params: Option<String>,
    },
    /// Build one agent's level hierarchy and print every level policy as JSON.
    DumpHierarchy(DumpArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Game file path or `builtin:<name>[:<params>]`.
    #[arg(long)]
    game: Option<String>,
    /// Agent spec such as `0=tom:mixed,K=3`, `1=level:1` or `1=scripted:H`.
    #[arg(long = "agent", value_name = "SPEC")]
    agents: Vec<String>,
    /// JSON experiment config; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the game's discount factor.
    #[arg(long)]
    discount: Option<f64>,
    /// Value iteration stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iterations: Option<usize>,
    /// Likelihood floor used when inferring opponent levels.
    #[arg(long = "eps")]
    epsilon: Option<f64>,
    /// Deepest level any agent may use.
    #[arg(long = "depth-cap")]
    depth_cap: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Singleton,
    Mixed,
}

#[derive(clap::Args)]
struct DumpArgs {
    #[arg(long)]
    game: String,
    #[arg(long, default_value_t = 0)]
    owner: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Singleton)]
    mode: ModeArg,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Poisson rate for the mixed mode.
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 3,
        message: message.into(),
    }
}

/// Writes `text` and a newline to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{text}").and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure {
            code: 2,
            message: format!("cannot write to stdout: {e}"),
        }),
        _ => Ok(()),
    }
}

fn build_config(args: RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure {
                code: 2,
                message: format!("cannot access `{}`: {e}", path.display()),
            })?;
            ExperimentConfig::from_json(&text)?
        }
        None => {
            let game = args
                .game
                .clone()
                .ok_or_else(|| config_failure("--game is required without --config"))?;
            ExperimentConfig::new(game, Vec::new())
        }
    };
    if let Some(game) = args.game {
        config.game = game;
    }
    if !args.agents.is_empty() {
        config.agents = args
            .agents
            .iter()
            .map(|s| AgentSpec::parse_flag(s))
            .collect::<Result<_, _>>()?;
    }
    macro_rules! apply {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field {
                config.$field = v;
            })*
        };
    }
    apply!(
        rounds,
        horizon,
        seed,
        tol,
        max_iterations,
        epsilon,
        depth_cap
    );
    if args.discount.is_some() {
        config.discount = args.discount;
    }
    if let Some(out) = args.out {
        config.out_dir = out;
    }
    Ok(config)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let config = build_config(args)?;
    let (game, exp) = config.run()?;
    write_outputs(&config.out_dir, &config, &game, &exp)?;
    emit(&format!(
        "wrote steps.csv, beliefs.csv and summary.json to {}",
        config.out_dir.display()
    ))
}

fn validate(source: &str) -> Result<(), Failure> {
    let game = load_game_unchecked(source)?;
    let report = game.validate();
    emit(&report.to_string())?;
    if report.issues.is_empty() {
        Ok(())
    } else {
        // the report itself is the diagnostic
        Err(Failure {
            code: 1,
            message: String::new(),
        })
    }
}

fn builtin(name: &str, params: Option<&str>) -> Result<(), Failure> {
    let game = tom_core::builtin::builtin_game(name, params).map_err(ConfigError::from)?;
    emit(&game.to_json())
}

fn dump_hierarchy(args: DumpArgs) -> Result<(), Failure> {
    let game = load_game(&args.game)?;
    let mode = match args.mode {
        ModeArg::Singleton => Mode::Singleton,
        ModeArg::Mixed => Mode::Mixed,
    };
    let hierarchy = Hierarchy::build(
        &game,
        args.owner,
        mode,
        args.depth,
        args.lambda,
        None,
        &SolverConfig::default(),
    )
    .map_err(|e| config_failure(e.to_string()))?;
    let json = serde_json::to_string_pretty(&hierarchy.dump(&game))
        .map_err(|e| config_failure(e.to_string()))?;
    emit(&json)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("tomsim: {first} (try --help)");
            return ExitCode::from(3);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { game } => validate(&game),
        Command::Builtin { name, params } => builtin(&name, params.as_deref()),
        Command::DumpHierarchy(args) => dump_hierarchy(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("tomsim: {}", f.message.replace('\n', " "));
            }
            ExitCode::from(f.code)
        }
    }
}
