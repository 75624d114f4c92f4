//! Flat deep-Q agent over the joint (relay, power level) action space, plus a
//! tabular Q-learning routine used as a reference on toy problems.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeStats, PolicyFn};
use crate::env::{Action, EnvConfig, Observation, RelayEnv};
use crate::error::{Error, Result};
use crate::nn::{DenseNet, GradientSet, HeadKind, NetCheckpoint, RmsProp};
use crate::replay::{RingBuffer, Transition, DEFAULT_CAPACITY};
use crate::{seeded_rng, SimRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DqnConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    /// Environment steps between gradient updates.
    pub train_interval: usize,
    /// Environment steps between target-network syncs.
    #[serde(rename = "target_sync_C")]
    pub target_sync: usize,
    pub learning_rate: f64,
    pub memory_size: usize,
    pub hidden_layers: Vec<usize>,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            epsilon: 0.1,
            batch_size: 64,
            train_interval: 10,
            target_sync: 200,
            learning_rate: 0.001,
            memory_size: DEFAULT_CAPACITY,
            hidden_layers: vec![50, 50],
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon must lie in [0, 1]"));
        }
        if self.batch_size == 0 || self.train_interval == 0 || self.target_sync == 0 {
            return Err(Error::invalid(
                "batch_size, train_interval and target_sync_C must be positive",
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.memory_size == 0 {
            return Err(Error::invalid("memory_size must be positive"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        Ok(())
    }
}

/// `k * (L - 1) + (l - 1)`.
pub fn encode_joint(relay: usize, level: usize, relays: usize, levels: usize) -> Result<usize> {
    if relay >= relays || level == 0 || level >= levels {
        return Err(Error::invalid(format!(
            "(relay {relay}, level {level}) outside K = {relays}, L = {levels}"
        )));
    }
    Ok(relay * (levels - 1) + (level - 1))
}

pub fn decode_joint(index: usize, relays: usize, levels: usize) -> Result<(usize, usize)> {
    if levels < 2 || index >= relays * (levels - 1) {
        return Err(Error::invalid(format!(
            "joint index {index} outside K = {relays}, L = {levels}"
        )));
    }
    Ok((index / (levels - 1), index % (levels - 1) + 1))
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice; greedy ties go to the lowest index.
pub fn select_action<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    assert!(!q_values.is_empty(), "no actions to choose from");
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// `r` on terminal steps, else `r + gamma * max Q_target(s', .)`.
pub fn td_target(reward: f64, next_q_values: &[f64], gamma: f64, terminal: bool) -> f64 {
    if terminal || next_q_values.is_empty() {
        reward
    } else {
        reward + gamma * next_q_values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Mean squared TD loss over a batch and one RMSProp step on `eval`.
///
/// `input` maps a transition to `(state features, next-state features)`.
/// Targets are computed from `target` before `eval` changes. Returns the
/// pre-update loss.
pub(crate) fn fit_batch<F>(
    eval: &mut DenseNet,
    target: &DenseNet,
    optimizer: &mut RmsProp,
    gamma: f64,
    batch: &[&Transition],
    input: F,
) -> Result<f64>
where
    F: Fn(&Transition) -> (Vec<f64>, Vec<f64>),
{
    if batch.is_empty() {
        return Err(Error::invalid("training batch is empty"));
    }
    let prepared = batch
        .iter()
        .map(|t| {
            let (x, next_x) = input(t);
            let y = if t.terminal {
                t.reward
            } else {
                td_target(t.reward, &target.forward(&next_x)?, gamma, false)
            };
            Ok((x, t.action, y))
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = 1.0 / batch.len() as f64;
    let mut grads = GradientSet::zeros_like(eval);
    let mut loss = 0.0;
    for (x, action, y) in &prepared {
        let q = eval.accumulate_td_gradient(x, *action, *y, scale, &mut grads)?;
        loss += (y - q).powi(2);
    }
    optimizer.step(eval, &grads)?;
    Ok(loss * scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqnCheckpoint {
    pub relays: usize,
    pub power_levels: usize,
    pub eval_net: NetCheckpoint,
    pub target_net: NetCheckpoint,
}

/// Flat agent: one Q-value per (relay, level) pair.
#[derive(Clone, Debug)]
pub struct DqnAgent {
    config: DqnConfig,
    relays: usize,
    levels: usize,
    eval: DenseNet,
    target: DenseNet,
    optimizer: RmsProp,
    buffer: RingBuffer<Transition>,
    rng: SimRng,
    global_step: u64,
}

impl DqnAgent {
    pub fn new(env: &EnvConfig, config: DqnConfig, seed: u64) -> Result<Self> {
        env.validate()?;
        config.validate()?;
        let mut rng = seeded_rng(seed);
        let outputs = env.relays * env.level_count();
        let eval = DenseNet::new(
            env.observation_len(),
            &config.hidden_layers,
            outputs,
            HeadKind::Plain,
            &mut rng,
        )?;
        let target = eval.clone();
        let optimizer = RmsProp::new(&eval, config.learning_rate)?;
        let buffer = RingBuffer::new(config.memory_size)?;
        Ok(Self {
            config,
            relays: env.relays,
            levels: env.power_levels,
            eval,
            target,
            optimizer,
            buffer,
            rng,
            global_step: 0,
        })
    }

    pub fn from_checkpoint(ckpt: &DqnCheckpoint, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let eval = DenseNet::from_checkpoint(&ckpt.eval_net)?;
        let target = DenseNet::from_checkpoint(&ckpt.target_net)?;
        if !eval.same_architecture(&target)
            || eval.output_dim() != ckpt.relays * (ckpt.power_levels.saturating_sub(1))
        {
            return Err(Error::invalid("DQN checkpoint networks do not match its action space"));
        }
        Ok(Self {
            optimizer: RmsProp::new(&eval, config.learning_rate)?,
            buffer: RingBuffer::new(config.memory_size)?,
            config,
            relays: ckpt.relays,
            levels: ckpt.power_levels,
            eval,
            target,
            rng: seeded_rng(seed),
            global_step: 0,
        })
    }

    pub fn checkpoint(&self) -> DqnCheckpoint {
        DqnCheckpoint {
            relays: self.relays,
            power_levels: self.levels,
            eval_net: self.eval.to_checkpoint(),
            target_net: self.target.to_checkpoint(),
        }
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
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

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn q_values(&self, obs: &Observation) -> Result<Vec<f64>> {
        self.eval.forward(&obs.features)
    }

    pub fn act(&mut self, obs: &Observation, epsilon: f64) -> Result<Action> {
        let q = self.q_values(obs)?;
        let index = select_action(&q, epsilon, &mut self.rng);
        let (relay, level) = decode_joint(index, self.relays, self.levels)?;
        Ok(Action::new(relay, level))
    }

    /// One gradient step on `batch`; returns the loss before the update.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        fit_batch(
            &mut self.eval,
            &self.target,
            &mut self.optimizer,
            self.config.gamma,
            batch,
            |t| (t.state.features.clone(), t.next_state.features.clone()),
        )
    }

    /// Copies the evaluate network into the target every `target_sync_C` steps.
    pub fn maybe_sync_target(&mut self, global_step: u64) -> bool {
        if global_step % self.config.target_sync as u64 == 0 {
            self.target.clone_from(&self.eval);
            true
        } else {
            false
        }
    }

    /// Stores a transition and trains when the schedule says so.
    fn observe(&mut self, transition: Transition) -> Result<Option<f64>> {
        self.buffer.push(transition);
        self.global_step += 1;
        let mut loss = None;
        if self.global_step % self.config.train_interval as u64 == 0
            && self.buffer.len() >= self.config.batch_size
        {
            let batch: Vec<Transition> = self
                .buffer
                .sample(self.config.batch_size, &mut self.rng)?
                .into_iter()
                .cloned()
                .collect();
            let refs: Vec<&Transition> = batch.iter().collect();
            loss = Some(self.train_step(&refs)?);
        }
        self.maybe_sync_target(self.global_step);
        Ok(loss)
    }

    /// Plays and learns from one episode.
    pub fn run_episode(&mut self, env: &mut RelayEnv, episode_seed: u64) -> Result<EpisodeStats> {
        let mut obs = env.reset(episode_seed);
        let mut rewards = Vec::with_capacity(env.config().episode_length);
        let mut losses = Vec::new();
        loop {
            let q = self.q_values(&obs)?;
            let index = select_action(&q, self.config.epsilon, &mut self.rng);
            let (relay, level) = decode_joint(index, self.relays, self.levels)?;
            let result = env.step(Action::new(relay, level))?;
            rewards.push(result.reward);
            let done = result.done;
            let next = result.next_observation;
            let loss = self.observe(Transition {
                state: obs,
                goal: None,
                action: index,
                reward: result.reward,
                next_state: next.clone(),
                terminal: done,
            })?;
            losses.extend(loss);
            obs = next;
            if done {
                break;
            }
        }
        Ok(EpisodeStats::new(&rewards, &losses, self.config.epsilon, None))
    }

    /// Frozen greedy policy.
    pub fn greedy_policy(&self) -> PolicyFn<'_> {
        Box::new(move |obs: &Observation| {
            let q = self.eval.forward(&obs.features).expect("observation matches network");
            let (relay, level) =
                decode_joint(argmax(&q), self.relays, self.levels).expect("index in range");
            Action::new(relay, level)
        })
    }
}

/// Dense table of Q-values, `states x actions`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    pub states: usize,
    pub actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn zeros(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            values: vec![0.0; states * actions],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.actions..(s + 1) * self.actions]
    }
}

/// `Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a))`.
pub fn tabular_q_update(
    table: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: usize,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    if s >= table.states || s_next >= table.states || a >= table.actions {
        return Err(Error::invalid("state or action index out of range"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha must lie in [0, 1]"));
    }
    let best_next = table.row(s_next).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let idx = s * table.actions + a;
    table.values[idx] += alpha * (r + gamma * best_next - table.values[idx]);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_encoding_examples() {
        assert_eq!(encode_joint(0, 1, 10, 10).unwrap(), 0);
        assert_eq!(encode_joint(9, 9, 10, 10).unwrap(), 89);
        assert_eq!(decode_joint(89, 10, 10).unwrap(), (9, 9));
        for k in 0..4 {
            for l in 1..5 {
                let idx = encode_joint(k, l, 4, 5).unwrap();
                assert_eq!(decode_joint(idx, 4, 5).unwrap(), (k, l));
            }
        }
        assert!(encode_joint(4, 1, 4, 5).is_err());
        assert!(encode_joint(0, 0, 4, 5).is_err());
        assert!(encode_joint(0, 5, 4, 5).is_err());
        assert!(decode_joint(16, 4, 5).is_err());
    }

    #[test]
    fn greedy_selection_and_ties() {
        let mut rng = seeded_rng(0);
        assert_eq!(select_action(&[1.0, 3.0, 2.0], 0.0, &mut rng), 1);
        assert_eq!(select_action(&[2.0, 2.0, 1.0], 0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = seeded_rng(3);
        let mut counts = [0usize; 4];
        for _ in 0..100_000 {
            counts[select_action(&[0.0, 9.0, 1.0, 2.0], 1.0, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn td_target_examples() {
        assert_eq!(td_target(1.0, &[5.0, 7.0], 0.0, false), 1.0);
        assert!((td_target(1.0, &[2.0, -1.0], 0.9, false) - 2.8).abs() < 1e-12);
        assert_eq!(td_target(0.0, &[100.0], 0.9, true), 0.0);
    }

    #[test]
    fn sync_schedule() {
        let mut agent = DqnAgent::new(
            &EnvConfig::default(),
            DqnConfig {
                target_sync: 100,
                ..DqnConfig::default()
            },
            1,
        )
        .unwrap();
        assert!(agent.maybe_sync_target(100));
        assert!(!agent.maybe_sync_target(150));
    }

    #[test]
    fn tabular_degenerate_rates() {
        let mut t = QTable::zeros(2, 2);
        t.values = vec![0.5, 1.0, -1.0, 2.0];
        let before = t.clone();
        tabular_q_update(&mut t, 0, 1, 3.0, 1, 0.0, 0.9).unwrap();
        assert_eq!(t, before);
        tabular_q_update(&mut t, 0, 1, 3.0, 1, 1.0, 0.0).unwrap();
        assert_eq!(t.get(0, 1), 3.0);
        assert!(tabular_q_update(&mut t, 2, 0, 0.0, 0, 0.5, 0.5).is_err());
    }
}
