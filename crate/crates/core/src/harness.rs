//! Configuration, training and evaluation runs, sweeps and metrics files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentKind, EpisodeStats, PolicyFn, RandomAgent};
use crate::dqn::{DqnAgent, DqnCheckpoint, DqnConfig};
use crate::env::{outage_probability_estimate, random_action, EnvConfig, RelayEnv};
use crate::error::{Error, Result};
use crate::hrl::{HrlAgent, HrlCheckpoint, HrlConfig};
use crate::io::{read_json, write_json};
use crate::seeded_rng;

/// Trailing window of the `success_ma` column.
pub const MA_WINDOW: usize = 10;

/// Metrics header, in file order.
pub const METRICS_COLUMNS: [&str; 8] = [
    "episode",
    "seed",
    "success_ma",
    "success_ep",
    "loss_mean",
    "epsilon",
    "goal_entropy",
    "wall_ms",
];

/// One agent or several, each trained on the same seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgentSelection {
    One(AgentKind),
    Many(Vec<AgentKind>),
}

impl AgentSelection {
    pub fn kinds(&self) -> Vec<AgentKind> {
        match self {
            AgentSelection::One(kind) => vec![*kind],
            AgentSelection::Many(kinds) => kinds.clone(),
        }
    }
}

impl From<AgentKind> for AgentSelection {
    fn from(kind: AgentKind) -> Self {
        AgentSelection::One(kind)
    }
}

/// Frozen-policy evaluation settings used when the command line gives none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub episodes: usize,
    pub lambdas: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            episodes: 100,
            lambdas: vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDimension {
    LearningRate,
    MemorySize,
    BatchSize,
    TrainInterval,
}

impl std::fmt::Display for SweepDimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepDimension::LearningRate => "learning_rate",
            SweepDimension::MemorySize => "memory_size",
            SweepDimension::BatchSize => "batch_size",
            SweepDimension::TrainInterval => "train_interval",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dimension: SweepDimension,
    pub values: Vec<f64>,
    /// Independent runs per value and seed.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub env: EnvConfig,
    pub agent: AgentSelection,
    #[serde(default)]
    pub dqn: DqnConfig,
    #[serde(default)]
    pub hrl: HrlConfig,
    /// Training episodes per seed.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Fill `wall_ms`; off by default so reruns produce identical files.
    #[serde(default)]
    pub record_wall_clock: bool,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_iterations() -> usize {
    100
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn new(env: EnvConfig, agent: impl Into<AgentSelection>) -> Self {
        Self {
            env,
            agent: agent.into(),
            dqn: DqnConfig::default(),
            hrl: HrlConfig::default(),
            iterations: default_iterations(),
            seeds: default_seeds(),
            output_dir: default_output_dir(),
            record_wall_clock: false,
            evaluation: EvaluationConfig::default(),
            sweep: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.dqn.validate()?;
        self.hrl.validate()?;
        if self.agent.kinds().is_empty() {
            return Err(Error::invalid("at least one agent is required"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds must not be empty"));
        }
        if self.evaluation.episodes == 0 {
            return Err(Error::invalid("evaluation episodes must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() || sweep.repeats == 0 {
                return Err(Error::invalid("sweep needs values and at least one repeat"));
            }
        }
        Ok(())
    }
}

/// One metrics line. `None` cells are written empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub seed: u64,
    pub success_ma: f64,
    pub success_ep: f64,
    pub loss_mean: Option<f64>,
    pub epsilon: f64,
    pub goal_entropy: Option<f64>,
    pub wall_ms: u64,
}

/// Trailing mean; the first `window - 1` entries average what is available.
pub fn moving_average(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    Ok((1..=values.len())
        .map(|end| {
            let w = &values[end.saturating_sub(window)..end];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect())
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let csv_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err)?;
    writer.write_record(METRICS_COLUMNS).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let csv_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(METRICS_COLUMNS) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsRow>, _>>()
        .map_err(csv_err)
}

/// Trained parameters of any agent, tagged by kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "agent", rename_all = "lowercase")]
pub enum AgentCheckpoint {
    Random { relays: usize, power_levels: usize },
    Dqn(DqnCheckpoint),
    Hrl(HrlCheckpoint),
}

impl AgentCheckpoint {
    pub fn kind(&self) -> AgentKind {
        match self {
            AgentCheckpoint::Random { .. } => AgentKind::Random,
            AgentCheckpoint::Dqn(_) => AgentKind::Dqn,
            AgentCheckpoint::Hrl(_) => AgentKind::Hrl,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Rejects checkpoints whose networks do not fit `env`.
    pub fn check_env(&self, env: &EnvConfig) -> Result<()> {
        let (relays, levels, inputs) = match self {
            AgentCheckpoint::Random {
                relays,
                power_levels,
            } => (*relays, *power_levels, None),
            AgentCheckpoint::Dqn(c) => (c.relays, c.power_levels, Some(c.eval_net.layers[0].inputs)),
            AgentCheckpoint::Hrl(c) => (
                c.relays,
                c.power_levels,
                Some(c.eval_net.layers[0].inputs.saturating_sub(c.relays)),
            ),
        };
        if relays != env.relays || levels != env.power_levels {
            return Err(Error::invalid(format!(
                "checkpoint has K={relays}, L={levels}; environment has K={}, L={}",
                env.relays, env.power_levels
            )));
        }
        if let Some(inputs) = inputs {
            if inputs != env.observation_len() {
                return Err(Error::invalid(format!(
                    "checkpoint expects {inputs} channel features; environment produces {}",
                    env.observation_len()
                )));
            }
        }
        Ok(())
    }
}

/// Metrics and final parameters of one (agent, seed) run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub agent: AgentKind,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub checkpoint: AgentCheckpoint,
}

impl TrainOutcome {
    pub fn success(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.success_ep).collect()
    }

    pub fn success_ma(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.success_ma).collect()
    }

    pub fn final_success_ma(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.success_ma)
    }
}

enum Learner {
    Random(RandomAgent),
    Dqn(Box<DqnAgent>),
    Hrl(Box<HrlAgent>),
}

impl Learner {
    fn new(config: &RunConfig, kind: AgentKind, seed: u64) -> Result<Self> {
        Ok(match kind {
            AgentKind::Random => Learner::Random(RandomAgent::new(&config.env, seed)),
            AgentKind::Dqn => Learner::Dqn(Box::new(DqnAgent::new(
                &config.env,
                config.dqn.clone(),
                seed,
            )?)),
            AgentKind::Hrl => Learner::Hrl(Box::new(HrlAgent::new(
                &config.env,
                config.hrl.clone(),
                config.iterations,
                seed,
            )?)),
        })
    }

    fn run_episode(&mut self, env: &mut RelayEnv, seed: u64) -> Result<EpisodeStats> {
        match self {
            Learner::Random(a) => a.run_episode(env, seed),
            Learner::Dqn(a) => a.run_episode(env, seed),
            Learner::Hrl(a) => Ok(a.run_episode(env, seed)?.stats),
        }
    }

    fn checkpoint(&self, env: &EnvConfig) -> AgentCheckpoint {
        match self {
            Learner::Random(_) => AgentCheckpoint::Random {
                relays: env.relays,
                power_levels: env.power_levels,
            },
            Learner::Dqn(a) => AgentCheckpoint::Dqn(a.checkpoint()),
            Learner::Hrl(a) => AgentCheckpoint::Hrl(a.checkpoint()),
        }
    }
}

/// Trains one agent on one seed without touching the filesystem.
///
/// Episode `e` replays the channel trace of `episode_seed(seed, e)`, so every
/// agent sees the same channels for the same seed.
pub fn train_run(config: &RunConfig, kind: AgentKind, seed: u64) -> Result<TrainOutcome> {
    config.validate()?;
    let mut env = RelayEnv::new(config.env.clone())?;
    let mut learner = Learner::new(config, kind, seed)?;
    let mut rows = Vec::with_capacity(config.iterations);
    let mut successes = Vec::with_capacity(config.iterations);
    for episode in 0..config.iterations {
        let start = Instant::now();
        let stats = learner.run_episode(&mut env, crate::episode_seed(seed, episode as u64))?;
        let wall_ms = if config.record_wall_clock {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        successes.push(stats.success_rate);
        let success_ma = *moving_average(&successes[successes.len().saturating_sub(MA_WINDOW)..], MA_WINDOW)?
            .last()
            .expect("nonempty");
        rows.push(MetricsRow {
            episode,
            seed,
            success_ma,
            success_ep: stats.success_rate,
            loss_mean: stats.loss_mean,
            epsilon: stats.epsilon,
            goal_entropy: stats.goal_entropy,
            wall_ms,
        });
    }
    Ok(TrainOutcome {
        agent: kind,
        seed,
        rows,
        checkpoint: learner.checkpoint(&config.env),
    })
}

pub fn metrics_path(dir: &Path, agent: AgentKind, seed: u64) -> PathBuf {
    dir.join(format!("{agent}_seed{seed}.csv"))
}

pub fn checkpoint_path(dir: &Path, agent: AgentKind, seed: u64) -> PathBuf {
    dir.join(format!("{agent}_seed{seed}.ckpt.json"))
}

/// Every (agent, seed) pair of `config`, run in parallel, in config order.
pub fn train_all(config: &RunConfig) -> Result<Vec<TrainOutcome>> {
    config.validate()?;
    let jobs: Vec<(AgentKind, u64)> = config
        .agent
        .kinds()
        .into_iter()
        .flat_map(|k| config.seeds.iter().map(move |&s| (k, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(kind, seed)| train_run(config, kind, seed))
        .collect()
}

/// Trains and writes one metrics file and one checkpoint per (agent, seed)
/// under `config.output_dir`.
pub fn train(config: &RunConfig) -> Result<Vec<TrainOutcome>> {
    let outcomes = train_all(config)?;
    for outcome in &outcomes {
        write_metrics(
            &metrics_path(&config.output_dir, outcome.agent, outcome.seed),
            &outcome.rows,
        )?;
        outcome.checkpoint.save(&checkpoint_path(
            &config.output_dir,
            outcome.agent,
            outcome.seed,
        ))?;
    }
    Ok(outcomes)
}

/// Outage of a frozen policy on a grid of thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub agent: AgentKind,
    pub seed: u64,
    pub episodes: usize,
    pub lambdas: Vec<f64>,
    pub outage: Vec<f64>,
}

impl EvalReport {
    pub fn outage_at(&self, lambda: f64) -> Option<f64> {
        self.lambdas
            .iter()
            .position(|&l| l == lambda)
            .map(|i| self.outage[i])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = String::from("agent,seed,episodes,lambda,outage\n");
        for (l, o) in self.lambdas.iter().zip(&self.outage) {
            text.push_str(&format!(
                "{},{},{},{l},{o}\n",
                self.agent, self.seed, self.episodes
            ));
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Greedy rollouts of `checkpoint` on `env` at every threshold in `lambdas`.
///
/// Each threshold reuses the same channel traces, so outage never decreases
/// along an increasing grid.
pub fn evaluate_checkpoint(
    checkpoint: &AgentCheckpoint,
    env: &EnvConfig,
    lambdas: &[f64],
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if episodes == 0 {
        return Err(Error::invalid("episodes must be at least 1"));
    }
    checkpoint.check_env(env)?;
    let dqn = match checkpoint {
        AgentCheckpoint::Dqn(c) => Some(DqnAgent::from_checkpoint(c, DqnConfig::default(), seed)?),
        _ => None,
    };
    let hrl = match checkpoint {
        AgentCheckpoint::Hrl(c) => Some(HrlAgent::from_checkpoint(c, HrlConfig::default(), seed)?),
        _ => None,
    };
    let mut outage = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = EnvConfig {
            lambda,
            ..env.clone()
        };
        cfg.validate()?;
        let policy: PolicyFn<'_> = match (&dqn, &hrl) {
            (Some(agent), _) => agent.greedy_policy(),
            (_, Some(agent)) => agent.greedy_policy(),
            _ => {
                let mut rng = seeded_rng(seed);
                let cfg = cfg.clone();
                Box::new(move |_| random_action(&cfg, &mut rng))
            }
        };
        outage.push(outage_probability_estimate(policy, episodes, &cfg, seed)?);
    }
    Ok(EvalReport {
        agent: checkpoint.kind(),
        seed,
        episodes,
        lambdas: lambdas.to_vec(),
        outage,
    })
}

/// Loads a checkpoint file and evaluates it, writing `eval_<agent>_seed<seed>.csv`
/// into `out`.
pub fn evaluate(
    config: &RunConfig,
    checkpoint: &Path,
    lambdas: &[f64],
    seed: u64,
    out: &Path,
) -> Result<EvalReport> {
    let ckpt = AgentCheckpoint::load(checkpoint)?;
    let report = evaluate_checkpoint(&ckpt, &config.env, lambdas, config.evaluation.episodes, seed)?;
    report.write_csv(&out.join(format!("eval_{}_seed{seed}.csv", report.agent)))?;
    Ok(report)
}

/// Curves of one sweep value across repeats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Final moving-average success of each repeat.
    pub finals: Vec<f64>,
}

impl SweepCell {
    pub fn final_mean(&self) -> f64 {
        self.finals.iter().sum::<f64>() / self.finals.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub agent: AgentKind,
    pub dimension: SweepDimension,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    /// Columns: value, episode, mean, min, max.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = String::from("value,episode,mean,min,max\n");
        for cell in &self.cells {
            for (i, ((m, lo), hi)) in cell.mean.iter().zip(&cell.min).zip(&cell.max).enumerate() {
                text.push_str(&format!("{},{i},{m},{lo},{hi}\n", cell.value));
            }
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Copy of `config` with one hyperparameter replaced, for DQN and HRL alike.
pub fn with_dimension(config: &RunConfig, dimension: SweepDimension, value: f64) -> Result<RunConfig> {
    let mut out = config.clone();
    let count = || {
        if value >= 1.0 && value.fract() == 0.0 {
            Ok(value as usize)
        } else {
            Err(Error::invalid(format!("{dimension} needs a positive integer, got {value}")))
        }
    };
    match dimension {
        SweepDimension::LearningRate => {
            out.dqn.learning_rate = value;
            out.hrl.learning_rate = value;
        }
        SweepDimension::MemorySize => {
            out.dqn.memory_size = count()?;
            out.hrl.memory_size = count()?;
        }
        SweepDimension::BatchSize => {
            out.dqn.batch_size = count()?;
            out.hrl.batch_size = count()?;
        }
        SweepDimension::TrainInterval => {
            out.dqn.train_interval = count()?;
            out.hrl.train_interval = count()?;
        }
    }
    out.validate()?;
    Ok(out)
}

/// Runs every sweep value `repeats` times per seed for each configured agent.
///
/// Repeat `r` of seed `s` uses run seed `episode_seed(s, r)`.
pub fn sweep(config: &RunConfig, dimension: SweepDimension, values: &[f64], repeats: usize) -> Result<Vec<SweepReport>> {
    config.validate()?;
    if values.is_empty() || repeats == 0 {
        return Err(Error::invalid("sweep needs values and at least one repeat"));
    }
    let variants = values
        .iter()
        .map(|&v| with_dimension(config, dimension, v))
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::new();
    for kind in config.agent.kinds() {
        let jobs: Vec<(usize, u64)> = (0..values.len())
            .flat_map(|i| {
                config.seeds.iter().flat_map(move |&s| {
                    (0..repeats as u64).map(move |r| (i, crate::episode_seed(s, r)))
                })
            })
            .collect();
        let outcomes = jobs
            .into_par_iter()
            .map(|(i, seed)| Ok((i, train_run(&variants[i], kind, seed)?)))
            .collect::<Result<Vec<_>>>()?;
        let cells = values
            .iter()
            .enumerate()
            .map(|(i, &value)| {
                let curves: Vec<Vec<f64>> = outcomes
                    .iter()
                    .filter(|(j, _)| *j == i)
                    .map(|(_, o)| o.success_ma())
                    .collect();
                summarize(value, &curves)
            })
            .collect();
        reports.push(SweepReport {
            agent: kind,
            dimension,
            cells,
        });
    }
    Ok(reports)
}

fn summarize(value: f64, curves: &[Vec<f64>]) -> SweepCell {
    let len = curves[0].len();
    let column = |e: usize| curves.iter().map(move |c| c[e]);
    SweepCell {
        value,
        mean: (0..len)
            .map(|e| column(e).sum::<f64>() / curves.len() as f64)
            .collect(),
        min: (0..len).map(|e| column(e).fold(f64::INFINITY, f64::min)).collect(),
        max: (0..len)
            .map(|e| column(e).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
        finals: curves.iter().map(|c| c[len - 1]).collect(),
    }
}

/// Runs the sweep described in `config.sweep` and writes
/// `sweep_<agent>_<dimension>.csv` into `out`.
pub fn sweep_from_config(config: &RunConfig, out: &Path) -> Result<Vec<SweepReport>> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::invalid("config has no [sweep] section"))?;
    let reports = sweep(config, spec.dimension, &spec.values, spec.repeats)?;
    for report in &reports {
        report.write_csv(&out.join(format!("sweep_{}_{}.csv", report.agent, report.dimension)))?;
    }
    Ok(reports)
}

/// First episode whose moving average reaches `fraction` of the final value.
pub fn convergence_episode(success_ma: &[f64], fraction: f64) -> Option<usize> {
    let last = *success_ma.last()?;
    success_ma.iter().position(|&v| v >= fraction * last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moving_average_examples() {
        let v = [0.3, 0.9, 0.1, 0.5];
        assert_eq!(moving_average(&v, 1).unwrap(), v.to_vec());
        assert_eq!(moving_average(&[0.0, 1.0], 2).unwrap(), vec![0.0, 0.5]);
        assert_eq!(moving_average(&[0.5; 7], 3).unwrap(), vec![0.5; 7]);
        assert!(moving_average(&[0.4; 7], 3)
            .unwrap()
            .iter()
            .all(|v| (v - 0.4).abs() < 1e-15));
        assert!(moving_average(&v, 0).is_err());
    }

    #[test]
    fn agent_selection_parses_one_or_many() {
        let one: RunConfig = toml::from_str("agent = \"hrl\"").unwrap();
        assert_eq!(one.agent.kinds(), vec![AgentKind::Hrl]);
        let many: RunConfig = toml::from_str("agent = [\"dqn\", \"random\"]").unwrap();
        assert_eq!(many.agent.kinds(), vec![AgentKind::Dqn, AgentKind::Random]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("agent = \"hrl\"\nepochs = 3").is_err());
        assert!(RunConfig::from_toml_str("agent = \"hrl\"\n[env]\nK = 3\nrelays = 3").is_err());
        assert!(RunConfig::from_toml_str("agent = \"hrl\"\n[hrl]\nzeta = 0.2\nalpha = 1").is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(RunConfig::from_toml_str("agent = \"hrl\"\nseeds = []").is_err());
        assert!(RunConfig::from_toml_str("agent = \"dqn\"\n[env]\nL = 1").is_err());
    }

    #[test]
    fn convergence_episode_examples() {
        assert_eq!(convergence_episode(&[0.1, 0.5, 0.9, 1.0], 0.95), Some(3));
        assert_eq!(convergence_episode(&[0.1, 0.96, 0.9, 1.0], 0.95), Some(1));
        assert_eq!(convergence_episode(&[], 0.95), None);
    }

    #[test]
    fn integer_dimensions_reject_fractions() {
        let config = RunConfig::new(EnvConfig::default(), AgentKind::Dqn);
        assert!(with_dimension(&config, SweepDimension::BatchSize, 12.5).is_err());
        let c = with_dimension(&config, SweepDimension::TrainInterval, 5.0).unwrap();
        assert_eq!((c.dqn.train_interval, c.hrl.train_interval), (5, 5));
    }
}
