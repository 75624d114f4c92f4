//! Two-level agent.
//!
//! A gradient-bandit meta-controller keeps a preference per relay and picks
//! one relay (the goal) per episode from the softmax of those preferences. A
//! goal-conditioned dueling Q-network then picks the source power level every
//! slot. The controller learns from per-slot binary rewards; the
//! meta-controller learns from the episode's mean success.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeStats, PolicyFn};
use crate::dqn::{argmax, fit_batch, select_action};
use crate::env::{Action, EnvConfig, Observation, RelayEnv};
use crate::error::{Error, Result};
use crate::nn::{DenseNet, HeadKind, NetCheckpoint, RmsProp};
use crate::replay::{GoalTransition, RingBuffer, Transition, DEFAULT_CAPACITY};
use crate::{seeded_rng, SimRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HrlConfig {
    /// Controller discount.
    pub gamma: f64,
    pub batch_size: usize,
    pub train_interval: usize,
    /// Controller gradient steps between target-network syncs.
    #[serde(rename = "target_sync_C")]
    pub target_sync: usize,
    pub learning_rate: f64,
    pub memory_size: usize,
    pub meta_memory_size: usize,
    /// Preference step size.
    pub zeta: f64,
    pub epsilon_min: f64,
    /// Per-slot decrement of the active goal's epsilon. When absent it is
    /// derived from `anneal_fraction`.
    pub anneal_sigma: Option<f64>,
    /// Share of training over which each goal's epsilon should reach
    /// `epsilon_min`, assuming goals are drawn uniformly.
    pub anneal_fraction: f64,
    pub hidden_layers: Vec<usize>,
}

impl Default for HrlConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            batch_size: 64,
            train_interval: 10,
            target_sync: 200,
            learning_rate: 0.001,
            memory_size: DEFAULT_CAPACITY,
            meta_memory_size: DEFAULT_CAPACITY,
            zeta: 0.1,
            epsilon_min: 0.05,
            anneal_sigma: None,
            anneal_fraction: 0.3,
            hidden_layers: vec![50, 50],
        }
    }
}

impl HrlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma must lie in [0, 1]"));
        }
        if self.batch_size == 0 || self.train_interval == 0 || self.target_sync == 0 {
            return Err(Error::invalid(
                "batch_size, train_interval and target_sync_C must be positive",
            ));
        }
        if !(self.learning_rate > 0.0) || !(self.zeta > 0.0) {
            return Err(Error::invalid("learning_rate and zeta must be positive"));
        }
        if self.memory_size == 0 || self.meta_memory_size == 0 {
            return Err(Error::invalid("replay capacities must be positive"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_min) {
            return Err(Error::invalid("epsilon_min must lie in [0, 1]"));
        }
        if let Some(sigma) = self.anneal_sigma {
            if !(sigma >= 0.0) {
                return Err(Error::invalid("anneal_sigma must be non-negative"));
            }
        }
        if !(self.anneal_fraction > 0.0 && self.anneal_fraction <= 1.0) {
            return Err(Error::invalid("anneal_fraction must lie in (0, 1]"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        Ok(())
    }

    /// Epsilon decrement per active slot for a run of `total_slots` slots.
    pub fn sigma_for(&self, relays: usize, total_slots: usize) -> f64 {
        self.anneal_sigma.unwrap_or_else(|| {
            let per_goal = self.anneal_fraction * total_slots as f64 / relays as f64;
            (1.0 - self.epsilon_min) / per_goal.max(1.0)
        })
    }
}

/// Softmax of the preferences, shifted by the maximum for stability.
pub fn goal_distribution(preferences: &[f64]) -> Vec<f64> {
    let max = preferences.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = preferences.iter().map(|m| (m - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Categorical draw by inverse CDF.
pub fn sample_goal<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // rounding left u above the final partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Gradient-bandit step on every preference, using the pre-update distribution.
pub fn update_preferences(
    preferences: &mut [f64],
    chosen: usize,
    external_reward: f64,
    baseline: f64,
    zeta: f64,
) -> Result<()> {
    if chosen >= preferences.len() {
        return Err(Error::invalid(format!("goal {chosen} out of range")));
    }
    let probs = goal_distribution(preferences);
    let advantage = external_reward - baseline;
    for (i, (m, p)) in preferences.iter_mut().zip(probs).enumerate() {
        let indicator = if i == chosen { 1.0 } else { 0.0 };
        *m += zeta * advantage * (indicator - p);
    }
    Ok(())
}

/// Incremental mean after the `count`-th reward.
pub fn update_baseline(baseline: f64, external_reward: f64, count: u64) -> f64 {
    assert!(count >= 1, "count starts at 1");
    baseline + (external_reward - baseline) / count as f64
}

/// Mean of the per-slot rewards collected under one goal.
pub fn external_reward(internal_rewards: &[f64]) -> Result<f64> {
    if internal_rewards.is_empty() {
        return Err(Error::invalid("no internal rewards"));
    }
    Ok(internal_rewards.iter().sum::<f64>() / internal_rewards.len() as f64)
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

#[derive(Clone, Debug)]
pub struct MetaController {
    preferences: Vec<f64>,
    step_size: f64,
    baseline: f64,
    updates: u64,
    buffer: RingBuffer<GoalTransition>,
}

impl MetaController {
    pub fn new(relays: usize, step_size: f64, memory_size: usize) -> Result<Self> {
        if relays == 0 {
            return Err(Error::invalid("need at least one relay"));
        }
        Ok(Self {
            preferences: vec![0.0; relays],
            step_size,
            baseline: 0.0,
            updates: 0,
            buffer: RingBuffer::new(memory_size)?,
        })
    }

    pub fn preferences(&self) -> &[f64] {
        &self.preferences
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn buffer(&self) -> &RingBuffer<GoalTransition> {
        &self.buffer
    }

    pub fn distribution(&self) -> Vec<f64> {
        goal_distribution(&self.preferences)
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_goal(&self.distribution(), rng)
    }

    /// Most probable goal.
    pub fn greedy_goal(&self) -> usize {
        argmax(&self.preferences)
    }

    /// Updates the baseline with `r_e` and then the preferences against it.
    pub fn update(&mut self, goal: usize, external_reward: f64) -> Result<()> {
        self.updates += 1;
        self.baseline = update_baseline(self.baseline, external_reward, self.updates);
        update_preferences(
            &mut self.preferences,
            goal,
            external_reward,
            self.baseline,
            self.step_size,
        )
    }

    /// Stores the goal-level tuple and learns from it.
    pub fn learn(&mut self, transition: GoalTransition) -> Result<()> {
        let (goal, reward) = (transition.goal, transition.external_reward);
        self.buffer.push(transition);
        self.update(goal, reward)
    }
}

/// Goal-conditioned dueling Q-network over power levels `1..L`.
///
/// Network output `j` is level `j + 1`; stored transitions use the output index.
#[derive(Clone, Debug)]
pub struct Controller {
    eval: DenseNet,
    target: DenseNet,
    optimizer: RmsProp,
    buffer: RingBuffer<Transition>,
    per_goal_epsilon: Vec<f64>,
    sigma: f64,
    epsilon_min: f64,
    gamma: f64,
    target_sync: usize,
    relays: usize,
    train_steps: u64,
}

impl Controller {
    pub fn new<R: Rng + ?Sized>(
        env: &EnvConfig,
        config: &HrlConfig,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let eval = DenseNet::new(
            env.observation_len() + env.relays,
            &config.hidden_layers,
            env.level_count(),
            HeadKind::Dueling,
            rng,
        )?;
        Self::from_nets(eval.clone(), eval, env.relays, config, sigma)
    }

    fn from_nets(
        eval: DenseNet,
        target: DenseNet,
        relays: usize,
        config: &HrlConfig,
        sigma: f64,
    ) -> Result<Self> {
        Ok(Self {
            optimizer: RmsProp::new(&eval, config.learning_rate)?,
            buffer: RingBuffer::new(config.memory_size)?,
            eval,
            target,
            per_goal_epsilon: vec![1.0; relays],
            sigma,
            epsilon_min: config.epsilon_min,
            gamma: config.gamma,
            target_sync: config.target_sync,
            relays,
            train_steps: 0,
        })
    }

    pub fn eval_net(&self) -> &DenseNet {
        &self.eval
    }

    pub fn eval_net_mut(&mut self) -> &mut DenseNet {
        &mut self.eval
    }

    pub fn target_net(&self) -> &DenseNet {
        &self.target
    }

    pub fn buffer(&self) -> &RingBuffer<Transition> {
        &self.buffer
    }

    pub fn per_goal_epsilon(&self) -> &[f64] {
        &self.per_goal_epsilon
    }

    pub fn set_epsilon(&mut self, goal: usize, epsilon: f64) {
        self.per_goal_epsilon[goal] = epsilon;
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// Observation features followed by the one-hot goal.
    pub fn input(&self, obs: &Observation, goal: usize) -> Vec<f64> {
        goal_input(&obs.features, goal, self.relays)
    }

    pub fn q_values(&self, obs: &Observation, goal: usize) -> Result<Vec<f64>> {
        if goal >= self.relays {
            return Err(Error::invalid(format!("goal {goal} out of range")));
        }
        self.eval.forward(&self.input(obs, goal))
    }

    /// Epsilon-greedy power level under the goal's own epsilon.
    pub fn select<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        goal: usize,
        rng: &mut R,
    ) -> Result<usize> {
        let q = self.q_values(obs, goal)?;
        Ok(select_action(&q, self.per_goal_epsilon[goal], rng) + 1)
    }

    pub fn greedy_level(&self, obs: &Observation, goal: usize) -> Result<usize> {
        Ok(argmax(&self.q_values(obs, goal)?) + 1)
    }

    /// `epsilon[goal] -= sigma`, floored at `epsilon_min`.
    pub fn anneal_epsilon(&mut self, goal: usize) {
        let eps = &mut self.per_goal_epsilon[goal];
        *eps = (*eps - self.sigma).max(self.epsilon_min);
    }

    /// One RMSProp step on a batch; targets bootstrap from the target net under
    /// the transition's own goal. Syncs the target every `target_sync_C` steps.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.iter().any(|t| t.goal.is_none_or(|g| g >= self.relays)) {
            return Err(Error::invalid("controller transitions need a valid goal"));
        }
        let relays = self.relays;
        let loss = fit_batch(
            &mut self.eval,
            &self.target,
            &mut self.optimizer,
            self.gamma,
            batch,
            |t| {
                let g = t.goal.expect("checked above");
                (
                    goal_input(&t.state.features, g, relays),
                    goal_input(&t.next_state.features, g, relays),
                )
            },
        )?;
        self.train_steps += 1;
        if self.train_steps % self.target_sync as u64 == 0 {
            self.target.clone_from(&self.eval);
        }
        Ok(loss)
    }
}

fn goal_input(features: &[f64], goal: usize, relays: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(features.len() + relays);
    x.extend_from_slice(features);
    x.extend((0..relays).map(|k| if k == goal { 1.0 } else { 0.0 }));
    x
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HrlCheckpoint {
    pub relays: usize,
    pub power_levels: usize,
    pub eval_net: NetCheckpoint,
    pub target_net: NetCheckpoint,
    pub preferences: Vec<f64>,
    pub baseline: f64,
    pub meta_updates: u64,
    pub per_goal_epsilon: Vec<f64>,
}

/// Per-episode trace of the hierarchical agent.
#[derive(Clone, Debug, PartialEq)]
pub struct HrlEpisode {
    pub stats: EpisodeStats,
    pub goal: usize,
    pub external_reward: f64,
    pub levels: Vec<usize>,
    pub rewards: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct HrlAgent {
    config: HrlConfig,
    levels: usize,
    meta: MetaController,
    controller: Controller,
    rng: SimRng,
    global_step: u64,
}

impl HrlAgent {
    /// `total_episodes` sizes the epsilon schedule when `anneal_sigma` is unset.
    pub fn new(env: &EnvConfig, config: HrlConfig, total_episodes: usize, seed: u64) -> Result<Self> {
        env.validate()?;
        config.validate()?;
        let mut rng = seeded_rng(seed);
        let sigma = config.sigma_for(env.relays, total_episodes * env.episode_length);
        let controller = Controller::new(env, &config, sigma, &mut rng)?;
        let meta = MetaController::new(env.relays, config.zeta, config.meta_memory_size)?;
        Ok(Self {
            config,
            levels: env.power_levels,
            meta,
            controller,
            rng,
            global_step: 0,
        })
    }

    pub fn from_checkpoint(ckpt: &HrlCheckpoint, config: HrlConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let eval = DenseNet::from_checkpoint(&ckpt.eval_net)?;
        let target = DenseNet::from_checkpoint(&ckpt.target_net)?;
        if !eval.same_architecture(&target)
            || eval.output_dim() + 1 != ckpt.power_levels
            || ckpt.preferences.len() != ckpt.relays
            || ckpt.per_goal_epsilon.len() != ckpt.relays
            || eval.input_dim() < ckpt.relays
        {
            return Err(Error::invalid("HRL checkpoint is inconsistent"));
        }
        let mut controller = Controller::from_nets(eval, target, ckpt.relays, &config, 0.0)?;
        controller.per_goal_epsilon = ckpt.per_goal_epsilon.clone();
        let mut meta = MetaController::new(ckpt.relays, config.zeta, config.meta_memory_size)?;
        meta.preferences = ckpt.preferences.clone();
        meta.baseline = ckpt.baseline;
        meta.updates = ckpt.meta_updates;
        Ok(Self {
            config,
            levels: ckpt.power_levels,
            meta,
            controller,
            rng: seeded_rng(seed),
            global_step: 0,
        })
    }

    pub fn checkpoint(&self) -> HrlCheckpoint {
        HrlCheckpoint {
            relays: self.controller.relays,
            power_levels: self.levels,
            eval_net: self.controller.eval.to_checkpoint(),
            target_net: self.controller.target.to_checkpoint(),
            preferences: self.meta.preferences.clone(),
            baseline: self.meta.baseline,
            meta_updates: self.meta.updates,
            per_goal_epsilon: self.controller.per_goal_epsilon.clone(),
        }
    }

    pub fn config(&self) -> &HrlConfig {
        &self.config
    }

    pub fn meta(&self) -> &MetaController {
        &self.meta
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut Controller {
        &mut self.controller
    }

    /// One goal for the whole episode, then one controller decision per slot.
    pub fn run_episode(&mut self, env: &mut RelayEnv, episode_seed: u64) -> Result<HrlEpisode> {
        let start = env.reset(episode_seed);
        let goal = self.meta.choose(&mut self.rng);
        let slots = env.config().episode_length;
        let mut rewards = Vec::with_capacity(slots);
        let mut levels = Vec::with_capacity(slots);
        let mut losses = Vec::new();
        let mut obs = start.clone();
        loop {
            let level = self.controller.select(&obs, goal, &mut self.rng)?;
            let result = env.step(Action::new(goal, level))?;
            rewards.push(result.reward);
            levels.push(level);
            let done = result.done;
            let next = result.next_observation;
            self.controller.buffer.push(Transition {
                state: obs,
                goal: Some(goal),
                action: level - 1,
                reward: result.reward,
                next_state: next.clone(),
                terminal: done,
            });
            self.global_step += 1;
            if self.global_step % self.config.train_interval as u64 == 0
                && self.controller.buffer.len() >= self.config.batch_size
            {
                let batch: Vec<Transition> = self
                    .controller
                    .buffer
                    .sample(self.config.batch_size, &mut self.rng)?
                    .into_iter()
                    .cloned()
                    .collect();
                let refs: Vec<&Transition> = batch.iter().collect();
                losses.push(self.controller.train_step(&refs)?);
            }
            self.controller.anneal_epsilon(goal);
            obs = next;
            if done {
                break;
            }
        }

        let r_e = external_reward(&rewards)?;
        self.meta.learn(GoalTransition {
            start_state: start,
            goal,
            external_reward: r_e,
            end_state: obs,
        })?;
        let mut stats = EpisodeStats::new(
            &rewards,
            &losses,
            self.controller.per_goal_epsilon[goal],
            Some(entropy(&self.meta.distribution())),
        );
        stats.goal = Some(goal);
        Ok(HrlEpisode {
            stats,
            goal,
            external_reward: r_e,
            levels,
            rewards,
        })
    }

    /// Frozen policy: most probable relay, greedy power level.
    pub fn greedy_policy(&self) -> PolicyFn<'_> {
        let goal = self.meta.greedy_goal();
        Box::new(move |obs: &Observation| {
            let level = self
                .controller
                .greedy_level(obs, goal)
                .expect("observation matches network");
            Action::new(goal, level)
        })
    }
}
