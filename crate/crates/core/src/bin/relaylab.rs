use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relaylab::harness::{self, RunConfig};

#[derive(Parser)]
#[command(name = "relaylab", version, about = "Relay and power selection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// One seed or a comma list; overrides `seeds` in the config.
    #[arg(long, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured agent on every seed.
    Train(Common),
    /// Roll out a frozen checkpoint over a grid of outage thresholds.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma list of thresholds; defaults to `evaluation.lambdas`.
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
    },
    /// Run the `[sweep]` section of the config.
    Sweep(Common),
}

fn load(common: &Common) -> relaylab::Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(seeds) = &common.seed {
        config.seeds = seeds.clone();
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> relaylab::Result<()> {
    match cli.command {
        Command::Train(common) => {
            let config = load(&common)?;
            for outcome in harness::train(&config)? {
                println!(
                    "{} seed {}: final success_ma {:.4} -> {}",
                    outcome.agent,
                    outcome.seed,
                    outcome.final_success_ma(),
                    harness::metrics_path(&config.output_dir, outcome.agent, outcome.seed)
                        .display()
                );
            }
        }
        Command::Evaluate {
            common,
            checkpoint,
            lambda,
        } => {
            let config = load(&common)?;
            let lambdas = lambda.unwrap_or_else(|| config.evaluation.lambdas.clone());
            for &seed in &config.seeds {
                let report =
                    harness::evaluate(&config, &checkpoint, &lambdas, seed, &config.output_dir)?;
                for (l, o) in report.lambdas.iter().zip(&report.outage) {
                    println!("{} seed {seed}: lambda {l} outage {o:.4}", report.agent);
                }
            }
        }
        Command::Sweep(common) => {
            let config = load(&common)?;
            for report in harness::sweep_from_config(&config, &config.output_dir)? {
                for cell in &report.cells {
                    println!(
                        "{} {}={}: final mean {:.4}, range [{:.4}, {:.4}]",
                        report.agent,
                        report.dimension,
                        cell.value,
                        cell.final_mean(),
                        cell.finals.iter().copied().fold(f64::INFINITY, f64::min),
                        cell.finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
