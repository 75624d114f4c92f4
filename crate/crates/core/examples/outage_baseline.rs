//! Outage probability of the uniform random policy across thresholds, for
//! both relaying protocols.

use relaylab::env::{outage_probability_estimate, random_action};
use relaylab::{seeded_rng, EnvConfig, Protocol};

fn main() -> relaylab::Result<()> {
    println!("lambda    DF      AF");
    for lambda in [1.0, 1.4, 1.8, 2.0, 2.2, 2.6] {
        let mut row = format!("{lambda:>6.1}");
        for protocol in [Protocol::DF, Protocol::AF] {
            let config = EnvConfig {
                lambda,
                protocol,
                ..EnvConfig::default()
            };
            let mut rng = seeded_rng(1);
            let policy = |_: &_| random_action(&config, &mut rng);
            let outage = outage_probability_estimate(policy, 200, &config, 42)?;
            row.push_str(&format!("  {outage:.4}"));
        }
        println!("{row}");
    }
    Ok(())
}
