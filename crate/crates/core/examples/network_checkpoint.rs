//! The dense Q-network on its own: fit a dueling head to fixed targets with
//! RMSProp, then save and reload it through the checkpoint format.

use relaylab::nn::{DenseNet, GradientSet, HeadKind, RmsProp};
use relaylab::seeded_rng;

fn main() -> relaylab::Result<()> {
    let mut rng = seeded_rng(5);
    let mut net = DenseNet::new(4, &[16, 16], 3, HeadKind::Dueling, &mut rng)?;
    let mut optimizer = RmsProp::new(&net, 0.01)?;
    let samples = [
        ([0.5, -0.2, 0.1, 0.9], 0, 1.0),
        ([-0.7, 0.4, 0.3, -0.1], 1, -0.5),
        ([0.2, 0.2, -0.8, 0.6], 2, 2.0),
    ];
    for step in 0..=600 {
        let mut grads = GradientSet::zeros_like(&net);
        let mut loss = 0.0;
        for (x, action, target) in &samples {
            let q = net.accumulate_td_gradient(x, *action, *target, 1.0 / 3.0, &mut grads)?;
            loss += (target - q).powi(2) / 3.0;
        }
        optimizer.step(&mut net, &grads)?;
        if step % 150 == 0 {
            println!("step {step:>3}: mean squared TD error {loss:.6}");
        }
    }

    let path = std::env::temp_dir().join("relaylab_net.json");
    net.save_json(&path)?;
    let restored = DenseNet::load_json(&path)?;
    println!(
        "saved {} parameters in layers {:?} to {}",
        net.parameter_count(),
        net.layer_shapes(),
        path.display()
    );
    for (x, action, target) in &samples {
        let q = restored.forward(x)?;
        println!("action {action}: target {target:>5.2}, restored net {:>8.5}", q[*action]);
    }
    Ok(())
}
