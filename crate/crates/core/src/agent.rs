//! Pieces shared by every agent, and the random baseline.

use serde::{Deserialize, Serialize};

use crate::env::{random_action, Action, EnvConfig, Observation, RelayEnv};
use crate::error::Result;
use crate::{seeded_rng, SimRng};

/// Frozen observation-to-action map used for evaluation.
pub type PolicyFn<'a> = Box<dyn FnMut(&Observation) -> Action + 'a>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Random,
    Dqn,
    Hrl,
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentKind::Random => "random",
            AgentKind::Dqn => "dqn",
            AgentKind::Hrl => "hrl",
        })
    }
}

/// Summary of one training episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    /// Mean reward, i.e. the fraction of slots without outage.
    pub success_rate: f64,
    pub slots: usize,
    /// Mean loss of the gradient steps taken, `None` when none were.
    pub loss_mean: Option<f64>,
    pub epsilon: f64,
    /// Entropy (nats) of the goal distribution after the episode, HRL only.
    pub goal_entropy: Option<f64>,
    pub goal: Option<usize>,
}

impl EpisodeStats {
    pub fn new(rewards: &[f64], losses: &[f64], epsilon: f64, goal_entropy: Option<f64>) -> Self {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Self {
            success_rate: if rewards.is_empty() { 0.0 } else { mean(rewards) },
            slots: rewards.len(),
            loss_mean: (!losses.is_empty()).then(|| mean(losses)),
            epsilon,
            goal_entropy,
            goal: None,
        }
    }
}

/// Uniform relay and uniform power level every slot.
#[derive(Clone, Debug)]
pub struct RandomAgent {
    config: EnvConfig,
    rng: SimRng,
}

impl RandomAgent {
    pub fn new(config: &EnvConfig, seed: u64) -> Self {
        Self {
            config: config.clone(),
            rng: seeded_rng(seed),
        }
    }

    pub fn act(&mut self) -> Action {
        random_action(&self.config, &mut self.rng)
    }

    pub fn run_episode(&mut self, env: &mut RelayEnv, episode_seed: u64) -> Result<EpisodeStats> {
        env.reset(episode_seed);
        let mut rewards = Vec::with_capacity(env.config().episode_length);
        loop {
            let result = env.step(self.act())?;
            rewards.push(result.reward);
            if result.done {
                break;
            }
        }
        Ok(EpisodeStats::new(&rewards, &[], 1.0, None))
    }

    pub fn policy(&mut self) -> PolicyFn<'_> {
        Box::new(move |_: &Observation| self.act())
    }
}
