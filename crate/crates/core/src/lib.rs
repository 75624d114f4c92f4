//! Relay and power-level selection for a two-hop cooperative link under
//! time-correlated Rayleigh fading, with random, flat DQN and hierarchical
//! (bandit over relays + dueling DQN over power) agents.

pub mod agent;
pub mod channel;
pub mod dqn;
pub mod env;
pub mod error;
pub mod harness;
pub mod hrl;
mod io;
pub mod nn;
pub mod replay;

pub use agent::{AgentKind, EpisodeStats, PolicyFn, RandomAgent};
pub use channel::{ChannelSnapshot, ComplexVector, FadingParams, LinkFading};
pub use dqn::{DqnAgent, DqnConfig};
pub use env::{Action, EnvConfig, Observation, Protocol, RelayEnv, StepResult};
pub use error::{Error, Result};
pub use hrl::{HrlAgent, HrlConfig};
pub use nn::{DenseNet, HeadKind, RmsProp};
pub use replay::{GoalTransition, RingBuffer, Transition};

use rand::SeedableRng;

/// Generator used for every stochastic component.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Seed for one episode of one run (splitmix64 finaliser over the pair).
pub fn episode_seed(run_seed: u64, episode: u64) -> u64 {
    let mut z = run_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(episode)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
