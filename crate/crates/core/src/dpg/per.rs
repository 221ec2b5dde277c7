use rand::Rng;

use crate::error::{Error, Result};

/// One environment transition `(s, u, r, s', done)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// `s_next` is terminal: nothing is bootstrapped past it.
    pub done: bool,
}

/// Binary tree of partial sums over a fixed number of leaves.
///
/// Internal nodes are recomputed from their children on every update, so the root
/// never accumulates drift from incremental additions.
#[derive(Debug, Clone)]
pub struct SumTree {
    leaves: usize,
    base: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(leaves: usize) -> Self {
        let base = leaves.max(1).next_power_of_two();
        Self {
            leaves,
            base,
            nodes: vec![0.0; 2 * base],
        }
    }

    pub fn len(&self) -> usize {
        self.leaves
    }

    pub fn is_empty(&self) -> bool {
        self.leaves == 0
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.base + i]
    }

    pub fn set(&mut self, i: usize, mass: f64) {
        assert!(i < self.leaves, "leaf {i} out of range");
        debug_assert!(mass >= 0.0 && mass.is_finite());
        let mut node = self.base + i;
        self.nodes[node] = mass;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative mass interval contains `prefix`; only leaves with positive
    /// mass are returned.
    pub fn find(&self, prefix: f64) -> usize {
        let mut u = prefix.clamp(0.0, self.total());
        let mut node = 1;
        while node < self.base {
            let left = self.nodes[2 * node];
            if u < left || self.nodes[2 * node + 1] <= 0.0 {
                node *= 2;
            } else {
                u -= left;
                node = 2 * node + 1;
            }
        }
        node - self.base
    }

    pub fn leaf_sum(&self) -> f64 {
        self.nodes[self.base..self.base + self.leaves].iter().sum()
    }
}

/// A sampled minibatch with its storage slots and normalized importance weights.
#[derive(Debug, Clone)]
pub struct PrioritizedSample {
    pub batch: Vec<Transition>,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Bounded FIFO replay memory with proportional prioritized sampling.
#[derive(Debug, Clone)]
pub struct PrioritizedBuffer {
    capacity: usize,
    data: Vec<Transition>,
    next: usize,
    tree: SumTree,
    alpha: f64,
    floor: f64,
    max_priority: f64,
}

impl PrioritizedBuffer {
    pub fn new(capacity: usize, alpha: f64, floor: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::domain("replay capacity must be positive"));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::domain("priority exponent must be >= 0"));
        }
        if !(floor > 0.0) {
            return Err(Error::domain("priority floor must be > 0"));
        }
        Ok(Self {
            capacity,
            data: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            tree: SumTree::new(capacity),
            alpha,
            floor,
            max_priority: 1.0,
        })
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

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn get(&self, slot: usize) -> Option<&Transition> {
        self.data.get(slot)
    }

    pub fn max_priority(&self) -> f64 {
        self.max_priority
    }

    /// Priority of the transition in `slot`, recovered from its stored mass.
    pub fn priority(&self, slot: usize) -> f64 {
        let mass = self.tree.get(slot);
        if self.alpha == 0.0 {
            return self.max_priority;
        }
        mass.powf(1.0 / self.alpha)
    }

    /// Stores `t` with the current maximum priority, evicting the oldest entry when full.
    /// Returns the slot used.
    pub fn push(&mut self, t: Transition) -> usize {
        let slot = self.next;
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[slot] = t;
        }
        self.tree.set(slot, self.max_priority.powf(self.alpha));
        self.next = (self.next + 1) % self.capacity;
        slot
    }

    /// Sets priorities `max(p, floor)` for the given slots.
    pub fn update_priorities(&mut self, slots: &[usize], priorities: &[f64]) -> Result<()> {
        if slots.len() != priorities.len() {
            return Err(Error::domain("slot and priority counts differ"));
        }
        for (&slot, &p) in slots.iter().zip(priorities) {
            if slot >= self.data.len() {
                return Err(Error::domain(format!("slot {slot} is empty")));
            }
            if !p.is_finite() {
                return Err(Error::domain(format!("non-finite priority {p}")));
            }
            let p = p.max(self.floor);
            self.max_priority = self.max_priority.max(p);
            self.tree.set(slot, p.powf(self.alpha));
        }
        Ok(())
    }

    /// Stratified proportional draw of `m` transitions with importance weights
    /// `(N·p_i)^(-β)` divided by the batch maximum.
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, beta: f64, rng: &mut R) -> Result<PrioritizedSample> {
        let n = self.data.len();
        if m == 0 || n < m {
            return Err(Error::domain(format!(
                "cannot sample {m} transitions from a buffer holding {n}"
            )));
        }
        let total = self.tree.total();
        let segment = total / m as f64;
        let mut indices = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for k in 0..m {
            let u = segment * (k as f64 + rng.random::<f64>());
            let mut slot = self.tree.find(u);
            if slot >= n {
                slot = n - 1;
            }
            let p = self.tree.get(slot) / total;
            indices.push(slot);
            weights.push((n as f64 * p).powf(-beta));
        }
        let max = weights.iter().cloned().fold(0.0, f64::max);
        weights.iter_mut().for_each(|w| *w /= max);
        let batch = indices.iter().map(|&i| self.data[i].clone()).collect();
        Ok(PrioritizedSample {
            batch,
            indices,
            weights,
        })
    }
}
