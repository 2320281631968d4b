use rand::seq::index;
use rand::Rng;

use crate::action_space::Action;
use crate::state_encoder::Observation;

#[derive(Clone, Debug)]
pub struct Transition {
    pub obs: Observation,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: Vec::new(),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Up to `n` distinct transitions, uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        let n = n.min(self.items.len());
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}
