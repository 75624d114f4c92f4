//! Training-interval sweep of the hierarchical agent with repeated runs;
//! writes a plot-ready CSV of mean and range per episode.

use relaylab::harness::{sweep, RunConfig, SweepDimension};
use relaylab::{AgentKind, EnvConfig};

fn main() -> relaylab::Result<()> {
    let mut config = RunConfig::new(EnvConfig::default(), AgentKind::Hrl);
    config.iterations = 60;
    let reports = sweep(&config, SweepDimension::TrainInterval, &[5.0, 10.0, 20.0], 3)?;
    for report in &reports {
        for cell in &report.cells {
            let lo = cell.finals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = cell.finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!(
                "{} {} = {:>4}: final success {:.3} (range {lo:.3}..{hi:.3})",
                report.agent,
                report.dimension,
                cell.value,
                cell.final_mean()
            );
        }
        let path = std::env::temp_dir().join("relaylab_sweep_train_interval.csv");
        report.write_csv(&path)?;
        println!("curves written to {}", path.display());
    }
    Ok(())
}
