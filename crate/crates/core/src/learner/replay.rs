use ndarray::Array2;
use rand::Rng;

use crate::env::{Transition, NUM_ACTIONS, OBS_DIM};

/// Fixed-capacity ring buffer shared by all satellites.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    next: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { data: Vec::new(), capacity, next: 0, pushed: 0 }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total transitions ever pushed.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    pub fn extend(&mut self, ts: impl IntoIterator<Item = Transition>) {
        for t in ts {
            self.push(t);
        }
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// Uniform indices with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut impl Rng) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.data.len())).collect()
    }

    pub fn batch(&self, idx: &[usize]) -> Batch {
        Batch::from_transitions(idx.iter().map(|i| &self.data[*i]))
    }
}

/// Column-stacked mini-batch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub mask: Array2<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// `B x K`.
    pub costs: Array2<f64>,
    pub next_obs: Array2<f64>,
    pub next_mask: Array2<f64>,
    pub done: Vec<bool>,
}

impl Batch {
    pub fn from_transitions<'a>(ts: impl IntoIterator<Item = &'a Transition>) -> Self {
        let ts: Vec<&Transition> = ts.into_iter().collect();
        let b = ts.len();
        let k = ts.first().map_or(1, |t| t.costs.len());
        let mut batch = Batch {
            obs: Array2::zeros((b, OBS_DIM)),
            mask: Array2::zeros((b, NUM_ACTIONS)),
            actions: Vec::with_capacity(b),
            rewards: Vec::with_capacity(b),
            costs: Array2::zeros((b, k)),
            next_obs: Array2::zeros((b, OBS_DIM)),
            next_mask: Array2::zeros((b, NUM_ACTIONS)),
            done: Vec::with_capacity(b),
        };
        for (i, t) in ts.iter().enumerate() {
            for j in 0..OBS_DIM {
                batch.obs[[i, j]] = t.obs[j];
                batch.next_obs[[i, j]] = t.next_obs[j];
            }
            for j in 0..NUM_ACTIONS {
                batch.mask[[i, j]] = t.mask[j];
                batch.next_mask[[i, j]] = t.next_mask[j];
            }
            for (j, c) in t.costs.iter().enumerate() {
                batch.costs[[i, j]] = *c;
            }
            batch.actions.push(t.action);
            batch.rewards.push(t.reward);
            batch.done.push(t.done);
        }
        batch
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Next-state masks of terminal rows are all zero; give them a uniform
    /// mask so softmax over `o'` stays defined (the bootstrap is zeroed anyway).
    pub fn bootstrap_mask(&self) -> Array2<f64> {
        let mut m = self.next_mask.clone();
        for (i, d) in self.done.iter().enumerate() {
            if *d || m.row(i).sum() == 0.0 {
                m.row_mut(i).fill(1.0);
            }
        }
        m
    }
}
