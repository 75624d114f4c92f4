//! Hierarchical agent: a gradient bandit picks one relay per episode and a
//! goal-conditioned dueling Q-network picks the power level every slot.

use relaylab::{episode_seed, EnvConfig, HrlAgent, HrlConfig, RelayEnv};

fn main() -> relaylab::Result<()> {
    let config = EnvConfig::default();
    let episodes = 100;
    let mut env = RelayEnv::new(config.clone())?;
    let mut agent = HrlAgent::new(&config, HrlConfig::default(), episodes, 0)?;
    let mut window = Vec::new();
    for episode in 0..episodes as u64 {
        let trace = agent.run_episode(&mut env, episode_seed(0, episode))?;
        window.push(trace.stats.success_rate);
        if window.len() == 10 {
            println!(
                "episodes {:>3}-{:>3}: success {:.3}, goal {} (eps {:.2}), goal entropy {:.3}",
                episode - 9,
                episode,
                window.iter().sum::<f64>() / 10.0,
                trace.goal,
                trace.stats.epsilon,
                trace.stats.goal_entropy.unwrap_or(f64::NAN),
            );
            window.clear();
        }
    }
    let probs = agent.meta().distribution();
    println!("\ngoal distribution: {:.3?}", probs);
    println!("baseline external reward: {:.3}", agent.meta().baseline());
    Ok(())
}
