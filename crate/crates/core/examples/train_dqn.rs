//! Flat deep Q-learning over the joint (relay, power level) action space.

use relaylab::{episode_seed, DqnAgent, DqnConfig, EnvConfig, RelayEnv};

fn main() -> relaylab::Result<()> {
    let config = EnvConfig::default();
    let mut env = RelayEnv::new(config.clone())?;
    let mut agent = DqnAgent::new(&config, DqnConfig::default(), 0)?;
    let mut window = Vec::new();
    for episode in 0..100u64 {
        let stats = agent.run_episode(&mut env, episode_seed(0, episode))?;
        window.push(stats.success_rate);
        if window.len() == 10 {
            let mean = window.iter().sum::<f64>() / 10.0;
            println!(
                "episodes {:>3}-{:>3}: success {mean:.3}, last loss {:.4}",
                episode - 9,
                episode,
                stats.loss_mean.unwrap_or(f64::NAN)
            );
            window.clear();
        }
    }
    let q = agent.q_values(&env.reset(episode_seed(0, 1_000)))?;
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("max Q on a fresh state: {max:.3} (returns are bounded by 1 / (1 - gamma) = 10)");
    Ok(())
}
