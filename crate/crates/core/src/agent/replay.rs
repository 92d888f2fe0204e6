use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// The current seed set, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedState {
    n_nodes: usize,
    nodes: Vec<NodeId>,
}

impl SeedState {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            n_nodes,
            nodes: Vec::new(),
        }
    }

    pub fn from_nodes(n_nodes: usize, nodes: &[NodeId]) -> Result<Self> {
        let mut s = Self::new(n_nodes);
        for &v in nodes {
            s.insert(v)?;
        }
        Ok(s)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.nodes.len() == self.n_nodes
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }

    /// Seeds in increasing id order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn insert(&mut self, v: NodeId) -> Result<()> {
        if v >= self.n_nodes {
            return Err(Error::NodeOutOfRange {
                id: v,
                n_nodes: self.n_nodes,
            });
        }
        match self.nodes.binary_search(&v) {
            Ok(_) => Err(Error::AlreadySeed(v)),
            Err(pos) => {
                self.nodes.insert(pos, v);
                Ok(())
            }
        }
    }

    pub fn with(&self, v: NodeId) -> Result<Self> {
        let mut s = self.clone();
        s.insert(v)?;
        Ok(s)
    }

    /// Indicator vector over all nodes.
    pub fn one_hot(&self) -> Vec<bool> {
        let mut bits = vec![false; self.n_nodes];
        for &v in &self.nodes {
            bits[v] = true;
        }
        bits
    }
}

/// One stored step. The next state is `state ∪ {action}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: SeedState,
    pub action: NodeId,
    /// Scaled reward.
    pub reward: f64,
    /// True for the step that completes the seed set.
    pub terminal: bool,
}

impl Transition {
    pub fn new(state: SeedState, action: NodeId, reward: f64, terminal: bool) -> Result<Self> {
        if state.contains(action) {
            return Err(Error::AlreadySeed(action));
        }
        if action >= state.n_nodes() {
            return Err(Error::NodeOutOfRange {
                id: action,
                n_nodes: state.n_nodes(),
            });
        }
        Ok(Self {
            state,
            action,
            reward,
            terminal,
        })
    }

    pub fn next_state(&self) -> SeedState {
        self.state
            .with(self.action)
            .expect("action checked at construction")
    }
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
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

    /// Appends, evicting the oldest entry when full.
    pub fn push(&mut self, t: Transition) {
        if self.capacity == 0 {
            return;
        }
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `b` distinct transitions, or `None` while fewer than `b` are stored.
    pub fn sample<R: Rng>(&self, b: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if b == 0 || self.items.len() < b {
            return None;
        }
        Some(
            index::sample(rng, self.items.len(), b)
                .into_iter()
                .map(|i| &self.items[i])
                .collect(),
        )
    }
}
