//! Train at lambda = 2, freeze the policy, then measure outage over a grid
//! of thresholds on shared channel traces.

use relaylab::harness::{evaluate_checkpoint, train_run, AgentCheckpoint, RunConfig};
use relaylab::{AgentKind, EnvConfig};

fn main() -> relaylab::Result<()> {
    let env = EnvConfig::default();
    let config = RunConfig::new(env.clone(), AgentKind::Hrl);
    let lambdas = [1.0, 1.4, 1.8, 2.0, 2.2, 2.6];
    let mut policies = vec![AgentCheckpoint::Random {
        relays: env.relays,
        power_levels: env.power_levels,
    }];
    for kind in [AgentKind::Dqn, AgentKind::Hrl] {
        policies.push(train_run(&config, kind, 0)?.checkpoint);
    }
    println!("lambda  {}", lambdas.map(|l| format!("{l:>7.1}")).join(""));
    for checkpoint in &policies {
        let report = evaluate_checkpoint(checkpoint, &env, &lambdas, 100, 9)?;
        let cells: String = report.outage.iter().map(|o| format!("{o:>7.4}")).collect();
        println!("{:<7} {cells}", report.agent.to_string());
    }
    Ok(())
}
