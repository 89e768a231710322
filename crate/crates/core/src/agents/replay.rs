use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::SimRng;

/// Binary tree of partial sums over leaf weights. Parents are recomputed from
/// their children on every write, so repeated updates do not drift.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.max(1).next_power_of_two();
        SumTree {
            leaves,
            nodes: vec![0.0; 2 * leaves],
        }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.nodes[self.leaves + i]
    }

    fn set(&mut self, i: usize, w: f64) {
        let mut node = self.leaves + i;
        self.nodes[node] = w;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative range contains `u`, for `u` in `[0, total)`.
    fn find(&self, mut u: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = self.nodes[2 * node];
            if u < left || self.nodes[2 * node + 1] <= 0.0 {
                node *= 2;
            } else {
                u -= left;
                node = 2 * node + 1;
            }
        }
        node - self.leaves
    }
}

/// Ring buffer with sampling probability proportional to `priority^alpha`.
#[derive(Debug, Clone)]
pub struct PrioritizedReplay<T> {
    capacity: usize,
    alpha: f64,
    items: Vec<T>,
    next: usize,
    tree: SumTree,
    max_priority: f64,
}

/// Offset keeping zero-error transitions sampleable.
pub const PRIORITY_EPS: f64 = 1e-6;

impl<T> PrioritizedReplay<T> {
    pub fn new(capacity: usize, alpha: f64) -> Result<Self> {
        if capacity == 0 || !(alpha >= 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "replay needs capacity > 0 and alpha >= 0 (got {capacity}, {alpha})"
            )));
        }
        Ok(PrioritizedReplay {
            capacity,
            alpha,
            items: Vec::new(),
            next: 0,
            tree: SumTree::new(capacity),
            max_priority: 1.0,
        })
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

    /// Store an item at the current maximum priority, overwriting the oldest
    /// once full. Returns its slot.
    pub fn insert(&mut self, item: T) -> usize {
        let slot = self.next;
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[slot] = item;
        }
        self.tree.set(slot, math::powf(self.max_priority, self.alpha));
        self.next = (self.next + 1) % self.capacity;
        slot
    }

    pub fn get(&self, slot: usize) -> Option<&T> {
        self.items.get(slot)
    }

    /// Draw `batch` slots with replacement.
    pub fn sample(&self, batch: usize, rng: &mut SimRng) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::InvalidParameter("cannot sample an empty replay".into()));
        }
        let total = self.tree.total();
        Ok((0..batch)
            .map(|_| {
                let slot = self.tree.find(rng.gen::<f64>() * total);
                slot.min(self.items.len() - 1)
            })
            .collect())
    }

    /// Set raw priority `p` (before the exponent).
    pub fn set_priority(&mut self, slot: usize, p: f64) {
        if slot < self.items.len() && p.is_finite() && p >= 0.0 {
            self.max_priority = self.max_priority.max(p);
            self.tree.set(slot, math::powf(p, self.alpha));
        }
    }

    /// Refresh priorities from TD errors: `p = |delta| + 1e-6`.
    pub fn update_priorities(&mut self, slots: &[usize], td_errors: &[f64]) {
        for (&s, &d) in slots.iter().zip(td_errors) {
            self.set_priority(s, d.abs() + PRIORITY_EPS);
        }
    }

    /// Current sampling probability of a slot.
    pub fn probability(&self, slot: usize) -> f64 {
        let total = self.tree.total();
        if slot >= self.items.len() || total <= 0.0 {
            0.0
        } else {
            self.tree.get(slot) / total
        }
    }
}
