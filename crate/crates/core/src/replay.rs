//! Fixed-capacity FIFO replay buffers with uniform sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 8000;

/// Low-level experience `(s, g, a, r, s')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Observation,
    /// Relay chosen by the meta-controller; `None` for the flat agent.
    pub goal: Option<usize>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    /// Final slot of its episode; no bootstrapping past it.
    pub terminal: bool,
}

/// High-level experience `(s_0, g, r_e, s_end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalTransition {
    pub start_state: Observation,
    pub goal: usize,
    pub external_reward: f64,
    pub end_state: Observation,
}

#[derive(Clone, Debug)]
pub struct RingBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    /// Slot the next push overwrites once full.
    cursor: usize,
}

impl<T> RingBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be at least 1"));
        }
        Ok(Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
    }

    /// Items from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let (newer, older) = self.items.split_at(self.cursor);
        older.iter().chain(newer.iter())
    }

    /// `batch` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&T>> {
        if self.items.is_empty() {
            return Err(Error::state("cannot sample from an empty replay buffer"));
        }
        Ok((0..batch)
            .map(|_| &self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}
