//! Two-hop relay network as a Markov decision process.
//!
//! The agent observes the previous slot's channels, picks one relay and one
//! source power level, and is rewarded 1 when the end-to-end mutual
//! information of the *new* slot clears the outage threshold, 0 otherwise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSnapshot, ComplexVector, FadingParams, LinkFading};
use crate::error::{Error, Result};
use crate::{seeded_rng, SimRng};

/// Relaying protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    /// Amplify-and-forward.
    AF,
    /// Decode-and-forward.
    DF,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::AF => f.write_str("AF"),
            Protocol::DF => f.write_str("DF"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Relay count.
    #[serde(rename = "K")]
    pub relays: usize,
    /// Power-level count; the source may use levels `1..L`.
    #[serde(rename = "L")]
    pub power_levels: usize,
    #[serde(rename = "N_S")]
    pub source_antennas: usize,
    #[serde(rename = "N_D")]
    pub destination_antennas: usize,
    /// Total transmit power shared by source and relay, watts.
    #[serde(rename = "P_max")]
    pub max_power: f64,
    /// Outage threshold, bits/s/Hz.
    pub lambda: f64,
    pub noise_variance: f64,
    pub protocol: Protocol,
    pub fading: LinkFading,
    /// Slots per episode.
    pub episode_length: usize,
}

impl Default for EnvConfig {
    /// Relays sit between a source and a distant destination: the direct
    /// link is 20 dB weaker than the relay hops.
    fn default() -> Self {
        let hop = FadingParams {
            rho: 0.95,
            element_variance: 1.0,
            innovation_variance: 1.0,
        };
        let direct = FadingParams {
            rho: 0.95,
            element_variance: 0.01,
            innovation_variance: 0.01,
        };
        Self {
            relays: 10,
            power_levels: 10,
            source_antennas: 2,
            destination_antennas: 2,
            max_power: 4.0,
            lambda: 2.0,
            noise_variance: 0.05,
            protocol: Protocol::DF,
            fading: LinkFading {
                si: hop,
                id: hop,
                sd: direct,
            },
            episode_length: 100,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.relays == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if self.power_levels < 2 {
            return Err(Error::invalid("L must be at least 2"));
        }
        if self.source_antennas == 0 || self.destination_antennas == 0 {
            return Err(Error::invalid("antenna counts must be at least 1"));
        }
        if !(self.max_power > 0.0 && self.max_power.is_finite()) {
            return Err(Error::invalid("P_max must be positive"));
        }
        // lambda = 0 is accepted: it turns outage off, which tests rely on.
        if !(self.lambda >= 0.0) || self.lambda.is_nan() {
            return Err(Error::invalid("lambda must be non-negative"));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid("noise variance must be positive"));
        }
        if self.episode_length == 0 {
            return Err(Error::invalid("episode length must be at least 1"));
        }
        self.fading.validate()
    }

    /// Length of an [`Observation`].
    pub fn observation_len(&self) -> usize {
        2 * (self.relays * self.source_antennas
            + self.relays * self.destination_antennas
            + self.source_antennas * self.destination_antennas)
    }

    /// Number of selectable power levels, `L - 1`.
    pub fn level_count(&self) -> usize {
        self.power_levels - 1
    }
}

/// One relay and one source power level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub relay_index: usize,
    /// In `1..L`.
    pub power_level: usize,
}

impl Action {
    pub fn new(relay_index: usize, power_level: usize) -> Self {
        Self {
            relay_index,
            power_level,
        }
    }

    pub fn validate(&self, config: &EnvConfig) -> Result<()> {
        if self.relay_index >= config.relays {
            return Err(Error::invalid(format!(
                "relay index {} out of range for K = {}",
                self.relay_index, config.relays
            )));
        }
        if self.power_level == 0 || self.power_level >= config.power_levels {
            return Err(Error::invalid(format!(
                "power level {} outside [1, {}]",
                self.power_level,
                config.power_levels - 1
            )));
        }
        Ok(())
    }
}

/// Flattened channel state of the previous slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub features: Vec<f64>,
}

impl Observation {
    pub fn from_snapshot(snapshot: &ChannelSnapshot) -> Self {
        Self {
            features: snapshot.features(),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    /// `1 - outage`.
    pub reward: f64,
    pub mutual_information: f64,
    pub outage: bool,
    pub next_observation: Observation,
    /// Last slot of the episode.
    pub done: bool,
}

/// Per-link SNRs for one relay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkSnr {
    pub si: f64,
    pub id: f64,
    pub sd: f64,
}

/// Splits `P_max` into `(P_s, P_r)` for level `l` of `L`.
///
/// The larger share comes from the grid and the smaller one from an exact
/// subtraction, so `P_s + P_r == P_max` holds bit for bit.
pub fn power_from_level(level: usize, levels: usize, max_power: f64) -> Result<(f64, f64)> {
    if level == 0 || level >= levels {
        return Err(Error::invalid(format!(
            "power level {level} outside [1, {}]",
            levels.saturating_sub(1)
        )));
    }
    let share = |n: usize| n as f64 * max_power / levels as f64;
    if 2 * level >= levels {
        let source = share(level);
        Ok((source, max_power - source))
    } else {
        let relay = share(levels - level);
        Ok((max_power - relay, relay))
    }
}

/// AF relay gain `sqrt(1 / (P_s |h_si|^2 + noise))`.
pub fn compute_amplification_factor(
    source_power: f64,
    h_si: &ComplexVector,
    noise_variance: f64,
) -> f64 {
    (1.0 / (source_power * h_si.squared_norm() + noise_variance)).sqrt()
}

pub fn snr_components(
    snapshot: &ChannelSnapshot,
    relay: usize,
    source_power: f64,
    relay_power: f64,
    noise_variance: f64,
) -> Result<LinkSnr> {
    if relay >= snapshot.relays() {
        return Err(Error::invalid(format!("relay index {relay} out of range")));
    }
    Ok(LinkSnr {
        si: source_power * snapshot.h_si[relay].squared_norm() / noise_variance,
        id: relay_power * snapshot.h_id[relay].squared_norm() / noise_variance,
        sd: source_power * snapshot.h_sd.squared_norm() / noise_variance,
    })
}

/// Amplify-and-forward mutual information with MRC at the destination.
pub fn mi_af(phi_si: f64, phi_id: f64, phi_sd: f64) -> f64 {
    let relayed = phi_si * phi_id / (phi_si + phi_id + 1.0);
    half_log2_1p(phi_sd + relayed)
}

/// Decode-and-forward mutual information.
///
/// The relay forwards only when it decodes, i.e. when its own link supports
/// rate `lambda`; otherwise the destination keeps just the direct copy.
pub fn mi_df(phi_si: f64, phi_id: f64, phi_sd: f64, lambda: f64) -> f64 {
    if half_log2_1p(phi_si) >= lambda {
        half_log2_1p(phi_sd + phi_id)
    } else {
        half_log2_1p(phi_sd)
    }
}

/// `0.5 * log2(1 + snr)`, accurate for small `snr`.
fn half_log2_1p(snr: f64) -> f64 {
    0.5 * snr.ln_1p() / std::f64::consts::LN_2
}

pub fn mutual_information(protocol: Protocol, snr: LinkSnr, lambda: f64) -> f64 {
    match protocol {
        Protocol::AF => mi_af(snr.si, snr.id, snr.sd),
        Protocol::DF => mi_df(snr.si, snr.id, snr.sd, lambda),
    }
}

/// 1 iff `mi < lambda`.
pub fn outage_indicator(mi: f64, lambda: f64) -> u8 {
    u8::from(mi < lambda)
}

/// Stateful environment; one instance per worker.
#[derive(Clone, Debug)]
pub struct RelayEnv {
    config: EnvConfig,
    rng: SimRng,
    snapshot: Option<ChannelSnapshot>,
    slot: usize,
}

impl RelayEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            rng: seeded_rng(0),
            snapshot: None,
            slot: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Draws fresh channels; the channel trace depends on `seed` only.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.rng = seeded_rng(seed);
        let snapshot = ChannelSnapshot::draw(
            self.config.relays,
            self.config.source_antennas,
            self.config.destination_antennas,
            &self.config.fading,
            &mut self.rng,
        )
        .expect("config validated on construction");
        let obs = Observation::from_snapshot(&snapshot);
        self.snapshot = Some(snapshot);
        self.slot = 0;
        obs
    }

    pub fn snapshot(&self) -> Option<&ChannelSnapshot> {
        self.snapshot.as_ref()
    }

    /// Slots played in the current episode.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        let previous = self
            .snapshot
            .as_ref()
            .ok_or_else(|| Error::state("step called before reset"))?;
        if self.slot >= self.config.episode_length {
            return Err(Error::state("episode finished; call reset"));
        }
        action.validate(&self.config)?;

        let current = previous.advance(&self.config.fading, &mut self.rng)?;
        let (source_power, relay_power) = power_from_level(
            action.power_level,
            self.config.power_levels,
            self.config.max_power,
        )?;
        let snr = snr_components(
            &current,
            action.relay_index,
            source_power,
            relay_power,
            self.config.noise_variance,
        )?;
        let mi = mutual_information(self.config.protocol, snr, self.config.lambda);
        let outage = outage_indicator(mi, self.config.lambda);

        self.slot += 1;
        let next_observation = Observation::from_snapshot(&current);
        self.snapshot = Some(current);
        Ok(StepResult {
            reward: f64::from(1 - outage),
            mutual_information: mi,
            outage: outage == 1,
            next_observation,
            done: self.slot == self.config.episode_length,
        })
    }
}

/// Monte Carlo outage probability of `policy` over `episodes * episode_length` slots.
///
/// Episode `e` replays the channel trace seeded by `episode_seed(seed, e)`.
pub fn outage_probability_estimate<P>(
    mut policy: P,
    episodes: usize,
    config: &EnvConfig,
    seed: u64,
) -> Result<f64>
where
    P: FnMut(&Observation) -> Action,
{
    if episodes == 0 {
        return Err(Error::invalid("need at least one episode"));
    }
    let mut env = RelayEnv::new(config.clone())?;
    let mut outages = 0usize;
    let mut slots = 0usize;
    for episode in 0..episodes {
        let mut obs = env.reset(crate::episode_seed(seed, episode as u64));
        loop {
            let result = env.step(policy(&obs))?;
            outages += usize::from(result.outage);
            slots += 1;
            obs = result.next_observation;
            if result.done {
                break;
            }
        }
    }
    Ok(outages as f64 / slots as f64)
}

/// Uniform relay and uniform power level.
pub fn random_action<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Action {
    Action::new(
        rng.random_range(0..config.relays),
        rng.random_range(1..config.power_levels),
    )
}
