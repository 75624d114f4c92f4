//! The meta-controller alone: a softmax gradient bandit over relays with a
//! running-mean baseline, on a toy problem where one relay always succeeds.

use relaylab::hrl::MetaController;
use relaylab::seeded_rng;

fn main() -> relaylab::Result<()> {
    let (relays, best) = (10, 6);
    let mut meta = MetaController::new(relays, 0.1, 1_000)?;
    let mut rng = seeded_rng(3);
    for update in 1..=500 {
        let goal = meta.choose(&mut rng);
        meta.update(goal, if goal == best { 1.0 } else { 0.0 })?;
        let p = meta.distribution()[best];
        if update % 50 == 0 || p > 0.9 {
            println!("update {update:>3}: P(best) = {p:.3}, baseline {:.3}", meta.baseline());
        }
        if p > 0.9 {
            break;
        }
    }
    println!("preferences: {:.3?}", meta.preferences());
    Ok(())
}
