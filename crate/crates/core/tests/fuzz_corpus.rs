//! Replays the checked-in fuzz seeds through the same checks the fuzz
//! targets make, so regressions show up without a nightly toolchain.

use std::fs;
use std::path::PathBuf;

use tom_core::config::{AgentSpec, ExperimentConfig};
use tom_core::{GameSpec, PolicyTable, PROB_TOL};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn game_seeds() {
    let mut valid = 0;
    for (name, data) in seeds("parse_game") {
        let text = std::str::from_utf8(&data).unwrap();
        let Ok(game) = GameSpec::parse_unchecked(text) else {
            continue;
        };
        let ok = game.validate().issues.is_empty();
        assert_eq!(ok, GameSpec::parse(text).is_ok(), "{name}");
        let again = GameSpec::parse_unchecked(&game.to_json()).unwrap();
        assert_eq!(again, game, "{name}");
        valid += usize::from(ok);
    }
    assert!(valid >= 4);
}

#[test]
fn agent_flag_seeds() {
    let mut parsed = 0;
    for (name, data) in seeds("parse_agent_flag") {
        let Ok(spec) = AgentSpec::parse_flag(std::str::from_utf8(&data).unwrap()) else {
            continue;
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: AgentSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec, "{name}");
        parsed += 1;
    }
    assert!(parsed >= 5);
}

#[test]
fn config_seeds() {
    let mut checked = 0;
    for (_, data) in seeds("parse_config") {
        if let Ok(config) = ExperimentConfig::from_json(std::str::from_utf8(&data).unwrap()) {
            config.check().unwrap();
            checked += 1;
        }
    }
    assert_eq!(checked, 2);
}

#[test]
fn policy_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("parse_policy") {
        let Ok(policy) = serde_json::from_slice::<PolicyTable>(&data) else {
            continue;
        };
        for row in policy.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= PROB_TOL, "{name}");
        }
        let back: PolicyTable =
            serde_json::from_slice(&serde_json::to_vec(&policy).unwrap()).unwrap();
        assert_eq!(back, policy);
        accepted += 1;
    }
    assert_eq!(accepted, 2);
}
