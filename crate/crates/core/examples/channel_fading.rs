//! Time-correlated Rayleigh fading: correlation from Doppler, and the
//! empirical autocorrelation of a simulated link.

use relaylab::channel::{correlation_from_doppler, evolve, sample_initial, FadingParams};
use relaylab::seeded_rng;

fn main() -> relaylab::Result<()> {
    let slot = 1e-3;
    for doppler in [10.0, 50.0, 100.0, 200.0] {
        let rho = correlation_from_doppler(doppler, slot)?;
        println!("f_d = {doppler:>5} Hz, slot 1 ms -> rho = {rho:.4}");
    }

    let params = FadingParams::stationary(0.95, 1.0)?;
    let mut rng = seeded_rng(7);
    let steps = 100_000;
    let mut trace = Vec::with_capacity(steps);
    let mut h = sample_initial(1, 1.0, &mut rng)?;
    for _ in 0..steps {
        trace.push(h.entries()[0]);
        h = evolve(&h, &params, &mut rng)?;
    }
    let power = trace.iter().map(|z| z.norm_sqr()).sum::<f64>() / steps as f64;
    println!("\nmean |h|^2 = {power:.4}");
    for lag in [1, 2, 5, 10, 20] {
        let corr = trace
            .iter()
            .zip(&trace[lag..])
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            / ((steps - lag) as f64 * power);
        println!("lag {lag:>2}: empirical {corr:.4}, model {:.4}", 0.95f64.powi(lag as i32));
    }
    Ok(())
}
