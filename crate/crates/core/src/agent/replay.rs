use rand::seq::index;
use rand::Rng;

use crate::vecmath::{StateVector, ACTION_DIM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    /// Normalised action in `[-1, 1]` per axis, before scaling to newtons.
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_state: StateVector,
    pub absorbing: bool,
}

/// Bounded FIFO store of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Slot that the next push overwrites once the buffer is full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::new(),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn extend(&mut self, ts: impl IntoIterator<Item = Transition>) {
        for t in ts {
            self.push(t);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Draws `n` distinct transitions, or `None` when fewer than `n` are stored.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if n == 0 || self.items.len() < n {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), n)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        let s = StateVector([0.0; 7]);
        Transition {
            state: s,
            action: [0.0; 3],
            reward: r,
            next_state: s,
            absorbing: false,
        }
    }

    #[test]
    fn capacity_bound_and_fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(t(i as f64));
        }
        assert_eq!(b.len(), 3);
        let mut rewards: Vec<f64> = b.iter().map(|t| t.reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_needs_enough_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = ReplayBuffer::new(100);
        b.extend((0..4).map(|i| t(i as f64)));
        assert!(b.sample(5, &mut rng).is_none());
        let s = b.sample(4, &mut rng).unwrap();
        let mut r: Vec<f64> = s.iter().map(|t| t.reward).collect();
        r.sort_by(f64::total_cmp);
        assert_eq!(r, vec![0.0, 1.0, 2.0, 3.0]);
    }
}
