//! CSV exports of an experiment trace.
//!
//! Comma separated, header row, LF line endings; floats use the shortest
//! representation that round-trips.

use std::io::Write;

use crate::game::GameSpec;
use crate::sim::Trace;

/// `round,t,state,action_0..,reward_0..` with state and action names.
pub fn write_steps_csv<W: Write>(game: &GameSpec, trace: &Trace, out: W) -> csv::Result<()> {
    let n = game.num_agents();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["round".to_string(), "t".to_string(), "state".to_string()];
    header.extend((0..n).map(|i| format!("action_{i}")));
    header.extend((0..n).map(|i| format!("reward_{i}")));
    w.write_record(&header)?;
    for (r, round) in trace.rounds.iter().enumerate() {
        for (t, step) in round.steps.iter().enumerate() {
            let mut record = vec![
                (r + 1).to_string(),
                t.to_string(),
                game.state_name(step.state).to_string(),
            ];
            record.extend(
                step.actions
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| game.action_name(i, a).to_string()),
            );
            record.extend(step.rewards.iter().map(|r| r.to_string()));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `round,agent,a,b,lambda_used,lambda_hat,inferred_level_0..,solves_delta`.
/// The inferred-level column of the modeling agent itself is left empty.
pub fn write_beliefs_csv<W: Write>(num_agents: usize, trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header: Vec<String> = ["round", "agent", "a", "b", "lambda_used", "lambda_hat"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..num_agents).map(|i| format!("inferred_level_{i}")));
    header.push("solves_delta".into());
    w.write_record(&header)?;
    for rec in &trace.beliefs {
        let mut record = vec![
            rec.round.to_string(),
            rec.agent.to_string(),
            rec.posterior.shape().to_string(),
            rec.posterior.rate().to_string(),
            rec.lambda_used.to_string(),
            rec.lambda_hat.to_string(),
        ];
        record.extend(
            rec.inferred
                .iter()
                .map(|l| l.map(|k| k.to_string()).unwrap_or_default()),
        );
        record.push(rec.solves_delta.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::sim::{run_experiment, AgentConfig, AgentKind, RunOptions, TomConfig};

    #[test]
    fn csv_layout() {
        let g = builtin::coordination();
        let agents = vec![
            AgentConfig {
                agent: 0,
                kind: AgentKind::Tom(TomConfig::default()),
            },
            AgentConfig {
                agent: 1,
                kind: AgentKind::FixedLevel(1),
            },
        ];
        let opts = RunOptions {
            rounds: 2,
            horizon: 2,
            ..RunOptions::default()
        };
        let exp = run_experiment(&g, &agents, &opts).unwrap();
        let mut steps = Vec::new();
        write_steps_csv(&g, &exp.trace, &mut steps).unwrap();
        let steps = String::from_utf8(steps).unwrap();
        let lines: Vec<&str> = steps.lines().collect();
        assert_eq!(
            lines[0],
            "round,t,state,action_0,action_1,reward_0,reward_1"
        );
        assert_eq!(lines[1], "1,0,s,A,A,2,2");
        assert_eq!(lines.len(), 5);
        assert!(!steps.contains('\r'));

        let mut beliefs = Vec::new();
        write_beliefs_csv(2, &exp.trace, &mut beliefs).unwrap();
        let beliefs = String::from_utf8(beliefs).unwrap();
        let lines: Vec<&str> = beliefs.lines().collect();
        assert_eq!(
            lines[0],
            "round,agent,a,b,lambda_used,lambda_hat,inferred_level_0,inferred_level_1,solves_delta"
        );
        assert_eq!(lines[1], "1,0,3,2,2,1.5,,1,4");
        assert_eq!(lines[2], "2,0,4,3,1.5,1.3333333333333333,,1,0");
    }
}
