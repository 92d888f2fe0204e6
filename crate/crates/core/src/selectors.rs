//! Non-learning seed selectors.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::seq::index;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalGraph};
use crate::oracle::estimate_influence;
use crate::rng;
use crate::sis::DiffusionParams;

fn check_k(g: &TemporalGraph, k: usize) -> Result<()> {
    if k > g.n_nodes() {
        Err(Error::KTooLarge {
            k,
            n_nodes: g.n_nodes(),
        })
    } else {
        Ok(())
    }
}

struct Candidate {
    gain: f64,
    node: NodeId,
    /// Estimated influence of the current seed set plus `node`.
    value: f64,
    round: usize,
}

impl Candidate {
    fn key(&self) -> (f64, Reverse<NodeId>) {
        (self.gain, Reverse(self.node))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    }
}

/// CELF-style lazy greedy over Monte Carlo gain estimates.
///
/// All estimates share the replication seeds derived from `p.rng_seed`, so
/// gains are exact differences of the same realized sample. Cached gains are
/// treated as upper bounds; a node is taken only once its gain has been
/// re-evaluated in the current round and still tops the queue. Ties go to the
/// lower node id. Returns nodes in selection order.
pub fn greedy_lazy(
    g: &TemporalGraph,
    k: usize,
    p: &DiffusionParams,
    reps: usize,
) -> Result<Vec<NodeId>> {
    check_k(g, k)?;
    p.validate()?;
    if k == 0 {
        return Ok(Vec::new());
    }
    let n = g.n_nodes();
    let first: Vec<Result<Candidate>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let value = estimate_influence(g, &[v], p, reps)?.mean;
            Ok(Candidate {
                gain: value,
                node: v,
                value,
                round: 0,
            })
        })
        .collect();
    let mut heap = first.into_iter().collect::<Result<BinaryHeap<_>>>()?;

    let mut seeds = Vec::with_capacity(k);
    let mut current = 0.0;
    while seeds.len() < k {
        let top = heap.pop().expect("k <= n keeps the queue non-empty");
        if top.round == seeds.len() {
            current = top.value;
            seeds.push(top.node);
            continue;
        }
        seeds.push(top.node);
        let value = estimate_influence(g, &seeds, p, reps)?.mean;
        seeds.pop();
        heap.push(Candidate {
            gain: value - current,
            node: top.node,
            value,
            round: seeds.len(),
        });
    }
    Ok(seeds)
}

/// Top-`k` nodes by out-degree; ties go to the lower id.
pub fn degree_top_k(g: &TemporalGraph, k: usize) -> Result<Vec<NodeId>> {
    check_k(g, k)?;
    let deg = g.out_degrees();
    let mut order: Vec<NodeId> = (0..g.n_nodes()).collect();
    order.sort_by_key(|&v| (Reverse(deg[v]), v));
    order.truncate(k);
    Ok(order)
}

/// Uniform sample of `k` distinct nodes, deterministic in `seed`.
pub fn random_k(g: &TemporalGraph, k: usize, seed: u64) -> Result<Vec<NodeId>> {
    check_k(g, k)?;
    let mut rng = rng::stream(seed, 0);
    Ok(index::sample(&mut rng, g.n_nodes(), k).into_vec())
}
