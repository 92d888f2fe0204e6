//! Monte Carlo estimation of expected influence and marginal gains.
//!
//! Replication `i` runs with seed `derive_seed(p.rng_seed, i)`. Replications
//! run on the current rayon pool and are reduced in index order, so the
//! estimate does not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalGraph};
use crate::rng::derive_seed;
use crate::sis::{self, seed_mask, DiffusionParams, DiffusionStats};

/// Replications used when reporting influence.
pub const EVAL_REPS: usize = 2000;
/// Replications used for training rewards.
pub const REWARD_REPS: usize = 100;

const INDEPENDENT_STREAM: u64 = 0x005E_ED0F_1DE9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfluenceEstimate {
    /// Seconds.
    pub mean: f64,
    /// Sample standard deviation of the per-replication values; 0 for one replication.
    pub std_dev: f64,
    pub replications: usize,
}

impl InfluenceEstimate {
    pub fn std_error(&self) -> f64 {
        self.std_dev / (self.replications as f64).sqrt()
    }

    /// Estimate over per-replication total active seconds.
    pub fn from_totals(totals: &[i64], n_nodes: usize) -> Self {
        let reps = totals.len();
        let n = n_nodes as f64;
        // Integer accumulation keeps the mean exact and order independent.
        let sum: i128 = totals.iter().map(|&x| x as i128).sum();
        let mean = sum as f64 / (reps as f64 * n);
        let std_dev = if reps > 1 {
            let ss: f64 = totals
                .iter()
                .map(|&x| {
                    let d = x as f64 / n - mean;
                    d * d
                })
                .sum();
            (ss / (reps - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_dev,
            replications: reps,
        }
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        Err(Error::InvalidParam("replications must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn run_totals(
    g: &TemporalGraph,
    mask: &[bool],
    p: &DiffusionParams,
    stream: u64,
    reps: usize,
) -> Vec<i64> {
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let rp = DiffusionParams {
                rng_seed: derive_seed(stream, i as u64),
                ..*p
            };
            sis::simulate(g, mask, &rp).0.total_active_time()
        })
        .collect()
}

/// Mean and spread of the influence over `reps` replications.
pub fn estimate_influence(
    g: &TemporalGraph,
    seeds: &[NodeId],
    p: &DiffusionParams,
    reps: usize,
) -> Result<InfluenceEstimate> {
    check_reps(reps)?;
    p.validate()?;
    let mask = seed_mask(g.n_nodes(), seeds)?;
    let totals = run_totals(g, &mask, p, p.rng_seed, reps);
    Ok(InfluenceEstimate::from_totals(&totals, g.n_nodes()))
}

/// Like [`estimate_influence`], also summing the diffusion statistics over
/// all replications.
pub fn estimate_with_stats(
    g: &TemporalGraph,
    seeds: &[NodeId],
    p: &DiffusionParams,
    reps: usize,
) -> Result<(InfluenceEstimate, DiffusionStats)> {
    check_reps(reps)?;
    p.validate()?;
    let mask = seed_mask(g.n_nodes(), seeds)?;
    let runs: Vec<(i64, DiffusionStats)> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let rp = DiffusionParams {
                rng_seed: derive_seed(p.rng_seed, i as u64),
                ..*p
            };
            let (log, stats) = sis::simulate(g, &mask, &rp);
            (log.total_active_time(), stats)
        })
        .collect();
    let totals: Vec<i64> = runs.iter().map(|r| r.0).collect();
    let mut stats = DiffusionStats::default();
    for (_, s) in &runs {
        stats.merge(s);
    }
    Ok((InfluenceEstimate::from_totals(&totals, g.n_nodes()), stats))
}

/// Estimated `I(base ∪ {v}) − I(base)` with per-replication spread.
///
/// With `use_crn` both arms reuse the same replication seeds; otherwise the
/// augmented arm draws from an independent stream.
pub fn marginal_gain_estimate(
    g: &TemporalGraph,
    base: &[NodeId],
    v: NodeId,
    p: &DiffusionParams,
    reps: usize,
    use_crn: bool,
) -> Result<InfluenceEstimate> {
    check_reps(reps)?;
    p.validate()?;
    g.check_node(v)?;
    let base_mask = seed_mask(g.n_nodes(), base)?;
    if base_mask[v] {
        return Err(Error::AlreadySeed(v));
    }
    let mut with_mask = base_mask.clone();
    with_mask[v] = true;
    let other_stream = if use_crn {
        p.rng_seed
    } else {
        derive_seed(p.rng_seed, INDEPENDENT_STREAM)
    };
    let before = run_totals(g, &base_mask, p, p.rng_seed, reps);
    let after = run_totals(g, &with_mask, p, other_stream, reps);
    let diffs: Vec<i64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    Ok(InfluenceEstimate::from_totals(&diffs, g.n_nodes()))
}

pub fn marginal_gain(
    g: &TemporalGraph,
    base: &[NodeId],
    v: NodeId,
    p: &DiffusionParams,
    reps: usize,
    use_crn: bool,
) -> Result<f64> {
    marginal_gain_estimate(g, base, v, p, reps, use_crn).map(|e| e.mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> TemporalGraph {
        TemporalGraph::from_edges(2, vec![(0, 1, 10)])
            .unwrap()
            .with_window(0, 100)
            .unwrap()
    }

    fn chain() -> TemporalGraph {
        TemporalGraph::from_edges(3, vec![(0, 1, 10), (1, 2, 20)])
            .unwrap()
            .with_window(0, 100)
            .unwrap()
    }

    fn p(mu: f64) -> DiffusionParams {
        DiffusionParams {
            mu,
            t_act: 30,
            rng_seed: 2024,
        }
    }

    #[test]
    fn deterministic_case_has_no_spread() {
        let est = estimate_influence(&chain(), &[0], &p(1.0), 50).unwrap();
        assert_eq!(est.std_dev, 0.0);
        assert!((est.mean - 160.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_replication() {
        let est = estimate_influence(&two_node(), &[0], &p(0.5), 1).unwrap();
        assert_eq!(est.std_dev, 0.0);
        assert!(est.mean == 50.0 || est.mean == 65.0);
        assert!(estimate_influence(&two_node(), &[0], &p(0.5), 0).is_err());
    }

    #[test]
    fn mu_zero_closed_form() {
        let est = estimate_influence(&chain(), &[0, 2], &p(0.0), 20).unwrap();
        assert_eq!(est.mean, 2.0 * 100.0 / 3.0);
        assert_eq!(est.std_dev, 0.0);
    }

    #[test]
    fn two_node_expectation() {
        let est = estimate_influence(&two_node(), &[0], &p(0.5), 2000).unwrap();
        assert!((est.mean - 57.5).abs() < 3.0 * est.std_error(), "{est:?}");
    }

    #[test]
    fn gains_deterministic() {
        // isolated node 3 added to the chain: its own seed interval only
        let g = TemporalGraph::from_edges(4, vec![(0, 1, 10), (1, 2, 20)])
            .unwrap()
            .with_window(0, 100)
            .unwrap();
        let gain = marginal_gain(&g, &[0], 3, &p(1.0), 5, true).unwrap();
        assert_eq!(gain, 100.0 / 4.0);

        let gain = marginal_gain(&chain(), &[0], 1, &p(1.0), 5, true).unwrap();
        assert!((gain - 70.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gain_errors() {
        assert!(matches!(
            marginal_gain(&chain(), &[0], 0, &p(1.0), 5, true),
            Err(Error::AlreadySeed(0))
        ));
        assert!(marginal_gain(&chain(), &[0], 9, &p(1.0), 5, true).is_err());
    }

    #[test]
    fn crn_gain_expectation() {
        let est = marginal_gain_estimate(&two_node(), &[0], 1, &p(0.5), 4000, true).unwrap();
        // Adding B as a seed: B goes from Bernoulli(0.5)*30 active seconds to 100.
        // E[gain] = (100 - 15) / 2 = 42.5
        assert!(
            (est.mean - 42.5).abs() < 3.0 * est.std_error().max(1e-12),
            "{est:?}"
        );
    }

    #[test]
    fn thread_count_invariance() {
        let g = TemporalGraph::from_edges(
            6,
            (0..300)
                .map(|i| (i % 6, (i * 5 + 2) % 6, (i * 3) as i64))
                .filter(|e| e.0 != e.1)
                .collect(),
        )
        .unwrap();
        let params = DiffusionParams {
            mu: 0.4,
            t_act: 25,
            rng_seed: 5,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_influence(&g, &[0, 3], &params, 257).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(2));
        assert_eq!(one, run(8));
    }
}
