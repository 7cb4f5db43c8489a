//! Built-in example games and a random game generator.

use rand::Rng;
use thiserror::Error;

use crate::game::{GameBuilder, GameError, GameSpec};

/// Largest grid (in cells) accepted by [`gridworld_chase`].
pub const MAX_GRID_CELLS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuiltinError {
    #[error(
        "unknown builtin game `{0}` (expected matching_pennies, coordination or gridworld_chase)"
    )]
    Unknown(String),
    #[error("bad parameters for `{name}`: {reason}")]
    BadParams { name: String, reason: String },
    #[error(transparent)]
    Game(#[from] GameError),
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn one_shot(actions: [&str; 2], payoff: impl Fn(usize, usize) -> (f64, f64)) -> GameSpec {
    let mut b = GameBuilder::new(names(&["s"]), vec![names(&actions), names(&actions)])
        .expect("two agents, one state");
    b.set_discount(0.9);
    for x in 0..2 {
        for y in 0..2 {
            let (r0, r1) = payoff(x, y);
            b.set_transition(0, &[x, y], vec![(0, 1.0)]).unwrap();
            b.set_reward(0, 0, &[x, y], r0).unwrap();
            b.set_reward(1, 0, &[x, y], r1).unwrap();
        }
    }
    b.build()
}

/// One state, actions `H`/`T`. Agent 0 wins +1 on a match and loses 1
/// otherwise; agent 1 gets the negation.
pub fn matching_pennies() -> GameSpec {
    one_shot(
        ["H", "T"],
        |x, y| if x == y { (1.0, -1.0) } else { (-1.0, 1.0) },
    )
}

/// One state, actions `A`/`B`. Both agents get 2 for `(A, A)`, 1 for
/// `(B, B)`, and 0 on a mismatch.
pub fn coordination() -> GameSpec {
    one_shot(["A", "B"], |x, y| match (x, y) {
        (0, 0) => (2.0, 2.0),
        (1, 1) => (1.0, 1.0),
        _ => (0.0, 0.0),
    })
}

pub const GRID_MOVES: [&str; 5] = ["up", "down", "left", "right", "stay"];

fn step(cell: usize, mv: usize, width: usize, height: usize) -> usize {
    let (r, c) = (cell / width, cell % width);
    let (r, c) = match mv {
        0 => (r.saturating_sub(1), c),
        1 => ((r + 1).min(height - 1), c),
        2 => (r, c.saturating_sub(1)),
        3 => (r, (c + 1).min(width - 1)),
        _ => (r, c),
    };
    r * width + c
}

/// Pursuit on a `width x height` grid.
///
/// A state is the pair of cells (chaser, evader); both agents pick one of
/// [`GRID_MOVES`] and moves into a wall leave the agent in place. Landing on
/// the same cell pays the chaser (agent 0) +1 and costs the evader 1. Play
/// starts with the two agents in opposite corners.
pub fn gridworld_chase(width: usize, height: usize) -> Result<GameSpec, BuiltinError> {
    let cells = width.saturating_mul(height);
    if width == 0 || height == 0 || cells > MAX_GRID_CELLS {
        return Err(BuiltinError::BadParams {
            name: "gridworld_chase".into(),
            reason: format!("grid {width}x{height} must have between 1 and {MAX_GRID_CELLS} cells"),
        });
    }
    let cell_name = |p: usize| format!("r{}c{}", p / width, p % width);
    let states = (0..cells * cells)
        .map(|s| format!("{}-{}", cell_name(s / cells), cell_name(s % cells)))
        .collect();
    let moves = names(&GRID_MOVES);
    let mut b = GameBuilder::new(states, vec![moves.clone(), moves])?;
    b.set_discount(0.9);
    b.set_initial_state(cells - 1)?;
    for s in 0..cells * cells {
        let (chaser, evader) = (s / cells, s % cells);
        for m0 in 0..GRID_MOVES.len() {
            for m1 in 0..GRID_MOVES.len() {
                let c = step(chaser, m0, width, height);
                let e = step(evader, m1, width, height);
                b.set_transition(s, &[m0, m1], vec![(c * cells + e, 1.0)])?;
                if c == e {
                    b.set_reward(0, s, &[m0, m1], 1.0)?;
                    b.set_reward(1, s, &[m0, m1], -1.0)?;
                }
            }
        }
    }
    Ok(b.build())
}

/// Resolves a builtin by name. `params` is only used by `gridworld_chase`,
/// as `WxH` or `W,H`; it defaults to 3x3.
pub fn builtin_game(name: &str, params: Option<&str>) -> Result<GameSpec, BuiltinError> {
    let no_params = |game: GameSpec| match params {
        None | Some("") => Ok(game),
        Some(p) => Err(BuiltinError::BadParams {
            name: name.into(),
            reason: format!("takes no parameters, got `{p}`"),
        }),
    };
    match name {
        "matching_pennies" => no_params(matching_pennies()),
        "coordination" => no_params(coordination()),
        "gridworld_chase" => {
            let (w, h) = match params {
                None | Some("") => (3, 3),
                Some(p) => parse_dims(p).ok_or_else(|| BuiltinError::BadParams {
                    name: name.into(),
                    reason: format!("expected WxH, got `{p}`"),
                })?,
            };
            gridworld_chase(w, h)
        }
        other => Err(BuiltinError::Unknown(other.to_string())),
    }
}

fn parse_dims(p: &str) -> Option<(usize, usize)> {
    let (w, h) = p.split_once(['x', ','])?;
    Some((w.trim().parse().ok()?, h.trim().parse().ok()?))
}

/// A random game with `num_agents` agents, 1..=`max_states` states and
/// 1..=`max_actions` actions per agent. Every transition row is explicit
/// with random support; rewards are uniform on [-1, 1].
pub fn random_game<R: Rng + ?Sized>(
    rng: &mut R,
    num_agents: usize,
    max_states: usize,
    max_actions: usize,
    discount: f64,
) -> GameSpec {
    let ns = rng.gen_range(1..=max_states);
    let states = (0..ns).map(|s| format!("s{s}")).collect();
    let actions = (0..num_agents)
        .map(|i| {
            let na = rng.gen_range(1..=max_actions);
            (0..na).map(|a| format!("a{i}_{a}")).collect()
        })
        .collect();
    let mut b = GameBuilder::new(states, actions).expect("random game shape is valid");
    b.set_discount(discount);
    for s in 0..ns {
        for joint in 0..b.num_joint() {
            let mut weights: Vec<f64> = (0..ns)
                .map(|_| {
                    if rng.gen_bool(0.6) {
                        rng.gen::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            let fallback = rng.gen_range(0..ns);
            weights[fallback] += 0.05;
            let total: f64 = weights.iter().sum();
            let dist = weights
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(t, &w)| (t, w / total))
                .collect();
            let decoded = b.decode_joint(joint);
            b.set_transition(s, &decoded, dist).unwrap();
            for agent in 0..num_agents {
                b.set_reward(agent, s, &decoded, rng.gen_range(-1.0..=1.0))
                    .unwrap();
            }
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pennies_is_zero_sum() {
        let g = matching_pennies();
        assert_eq!(g.num_states(), 1);
        for joint in 0..g.num_joint() {
            assert_eq!(g.reward(0, 0, joint) + g.reward(1, 0, joint), 0.0);
        }
    }

    #[test]
    fn chase_dimensions() {
        let g = gridworld_chase(3, 3).unwrap();
        assert_eq!(g.num_states(), 81);
        assert_eq!(g.num_actions(0), 5);
        assert_eq!(g.num_actions(1), 5);
        assert_eq!(g.state_name(g.initial_state()), "r0c0-r2c2");
        assert!(g.validate().is_valid());
        assert_eq!(g.validate().defaulted_rows, 0);
    }

    #[test]
    fn chase_walls_clamp() {
        let g = gridworld_chase(2, 2).unwrap();
        let s = g.state_index("r0c0-r1c1").unwrap();
        let joint = g.joint_index(&[0, 1]);
        assert_eq!(g.transition(s, joint), &[(s, 1.0)]);
        let joint = g.joint_index(&[3, 2]);
        let t = g.state_index("r0c1-r1c0").unwrap();
        assert_eq!(g.transition(s, joint), &[(t, 1.0)]);
        let joint = g.joint_index(&[3, 0]);
        assert_eq!(g.reward(0, s, joint), 1.0);
        assert_eq!(g.reward(1, s, joint), -1.0);
    }

    #[test]
    fn lookup_by_name() {
        assert_eq!(
            builtin_game("gridworld_chase", Some("2x3"))
                .unwrap()
                .num_states(),
            36
        );
        assert_eq!(
            builtin_game("gridworld_chase", Some("2,3"))
                .unwrap()
                .num_states(),
            36
        );
        assert!(matches!(
            builtin_game("gridworld_chase", Some("9x9")),
            Err(BuiltinError::BadParams { .. })
        ));
        assert!(matches!(
            builtin_game("gridworld_chase", Some("0x3")),
            Err(BuiltinError::BadParams { .. })
        ));
        assert!(matches!(
            builtin_game("coordination", Some("3")),
            Err(BuiltinError::BadParams { .. })
        ));
        assert_eq!(
            builtin_game("chess", None),
            Err(BuiltinError::Unknown("chess".into()))
        );
    }

    #[test]
    fn builtins_validate() {
        for g in [
            matching_pennies(),
            coordination(),
            gridworld_chase(3, 3).unwrap(),
        ] {
            assert!(g.validate().is_valid());
        }
    }

    #[test]
    fn random_games_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let g = random_game(&mut rng, 3, 4, 3, 0.9);
            assert!(g.validate().is_valid());
            assert_eq!(g.validate().defaulted_rows, 0);
        }
    }
}
