//! Social-SIS diffusion.
//!
//! Seeds stay active over the whole horizon `[T_s, T_e)`. Edges are replayed
//! in timestamp order; an edge `(u, v, t)` whose source is active at `t`
//! activates `v` with probability `mu`. A successful activation grants `v`
//! another `t_act` seconds of activity, appended after any activity it
//! already has, and clipped to `T_e`.
//!
//! Intervals are half-open: a node whose interval ends at `t` is inactive at
//! `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalGraph};
use crate::rng::counter_uniform;

/// Thirty days, the length used for "one month" presets.
pub const MONTH_SECONDS: i64 = 2_592_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionParams {
    pub mu: f64,
    /// Seconds of activity granted per successful activation.
    pub t_act: i64,
    pub rng_seed: u64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            mu: 0.5,
            t_act: MONTH_SECONDS,
            rng_seed: 0,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidParam(format!(
                "mu = {} not in [0, 1]",
                self.mu
            )));
        }
        if self.t_act <= 0 {
            return Err(Error::InvalidParam(format!(
                "t_act = {} must be > 0",
                self.t_act
            )));
        }
        Ok(())
    }
}

/// Half-open activity intervals `[start, end)` per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationLog {
    intervals: Vec<Vec<(i64, i64)>>,
    t_start: i64,
    t_end: i64,
}

impl ActivationLog {
    pub fn empty(n_nodes: usize, t_start: i64, t_end: i64) -> Self {
        Self {
            intervals: vec![Vec::new(); n_nodes],
            t_start,
            t_end,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self, v: NodeId) -> &[(i64, i64)] {
        &self.intervals[v]
    }

    pub fn t_start(&self) -> i64 {
        self.t_start
    }

    pub fn t_end(&self) -> i64 {
        self.t_end
    }

    /// Total active seconds over all nodes.
    pub fn total_active_time(&self) -> i64 {
        self.intervals.iter().flatten().map(|(s, e)| e - s).sum()
    }

    /// True if every node's intervals are sorted, disjoint, non-empty and
    /// inside the horizon.
    pub fn is_well_formed(&self) -> bool {
        self.intervals.iter().all(|iv| {
            iv.iter()
                .all(|&(s, e)| s < e && s >= self.t_start && e <= self.t_end)
                && iv.windows(2).all(|w| w[0].1 <= w[1].0)
        })
    }

    /// Writes `node,start,end` rows using original node ids.
    pub fn write_csv<W: std::io::Write>(&self, g: &TemporalGraph, mut w: W) -> Result<()> {
        writeln!(w, "node,start,end")?;
        for (v, iv) in self.intervals.iter().enumerate() {
            for (s, e) in iv {
                writeln!(w, "{},{},{}", g.original_id(v), s, e)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffusionStats {
    /// Edge events whose source was active.
    pub attempts: u64,
    pub successes: u64,
    /// Successes whose target was already active at the event time.
    pub successes_on_active: u64,
}

impl DiffusionStats {
    pub fn merge(&mut self, other: &DiffusionStats) {
        self.attempts += other.attempts;
        self.successes += other.successes;
        self.successes_on_active += other.successes_on_active;
    }
}

/// `t` lies in one of the sorted, disjoint intervals.
#[inline]
fn active_at(intervals: &[(i64, i64)], t: i64) -> bool {
    let i = intervals.partition_point(|&(s, _)| s <= t);
    i > 0 && t < intervals[i - 1].1
}

/// Validates and deduplicates a seed set into a membership mask.
pub fn seed_mask(n_nodes: usize, seeds: &[NodeId]) -> Result<Vec<bool>> {
    let mut mask = vec![false; n_nodes];
    for &s in seeds {
        if s >= n_nodes {
            return Err(Error::NodeOutOfRange { id: s, n_nodes });
        }
        mask[s] = true;
    }
    Ok(mask)
}

/// Runs one Social-SIS replication.
///
/// The coin for edge `i` is `counter_uniform(p.rng_seed, i)`, drawn only when
/// the edge's source is active. Two runs with the same `rng_seed` therefore
/// see the same coin on every edge they both consider, which is what makes
/// common-random-number differences tight.
pub fn run_diffusion(
    g: &TemporalGraph,
    seeds: &[NodeId],
    p: &DiffusionParams,
) -> Result<(ActivationLog, DiffusionStats)> {
    p.validate()?;
    let is_seed = seed_mask(g.n_nodes(), seeds)?;
    Ok(simulate(g, &is_seed, p))
}

pub(crate) fn simulate(
    g: &TemporalGraph,
    is_seed: &[bool],
    p: &DiffusionParams,
) -> (ActivationLog, DiffusionStats) {
    let (t_s, t_e) = (g.t_start(), g.t_end());
    let mut log = ActivationLog::empty(g.n_nodes(), t_s, t_e);
    let mut stats = DiffusionStats::default();
    if !is_seed.iter().any(|&s| s) {
        return (log, stats);
    }
    for (v, &s) in is_seed.iter().enumerate() {
        if s && t_s < t_e {
            log.intervals[v].push((t_s, t_e));
        }
    }

    for (idx, e) in g.edges().iter().enumerate() {
        let t = e.timestamp;
        if !(is_seed[e.src] || active_at(&log.intervals[e.src], t)) {
            continue;
        }
        stats.attempts += 1;
        if is_seed[e.dst] {
            continue;
        }
        let success = p.mu >= 1.0 || (p.mu > 0.0 && counter_uniform(p.rng_seed, idx as u64) < p.mu);
        if !success {
            continue;
        }
        stats.successes += 1;
        let target = &mut log.intervals[e.dst];
        if active_at(target, t) {
            stats.successes_on_active += 1;
        }
        let last_end = target.last().map_or(i64::MIN, |&(_, end)| end);
        let start = t.max(last_end);
        let end = t_e.min(start.saturating_add(p.t_act));
        if end > start {
            target.push((start, end));
        }
    }
    (log, stats)
}

/// Average active time per node: total active seconds divided by `n_nodes`.
pub fn influence(log: &ActivationLog, n_nodes: usize) -> f64 {
    if n_nodes == 0 {
        return 0.0;
    }
    log.total_active_time() as f64 / n_nodes as f64
}

/// Percentage of successful activations that hit an already-active node.
pub fn fraction_active_activations(stats: &DiffusionStats) -> f64 {
    if stats.successes == 0 {
        0.0
    } else {
        100.0 * stats.successes_on_active as f64 / stats.successes as f64
    }
}

/// Number of nodes with any activity inside each of `n_windows` equal
/// windows of `[T_s, T_e)`.
pub fn window_activity(log: &ActivationLog, n_windows: usize) -> Result<Vec<usize>> {
    if n_windows == 0 {
        return Err(Error::InvalidParam("n_windows must be >= 1".into()));
    }
    let (t_s, t_e) = (log.t_start as f64, log.t_end as f64);
    let width = (t_e - t_s) / n_windows as f64;
    let bounds: Vec<(f64, f64)> = (0..n_windows)
        .map(|w| {
            let lo = t_s + width * w as f64;
            let hi = if w + 1 == n_windows {
                t_e
            } else {
                t_s + width * (w + 1) as f64
            };
            (lo, hi)
        })
        .collect();
    let mut counts = vec![0; n_windows];
    for iv in &log.intervals {
        for (w, &(lo, hi)) in bounds.iter().enumerate() {
            if iv.iter().any(|&(s, e)| (s as f64) < hi && (e as f64) > lo) {
                counts[w] += 1;
            }
        }
    }
    Ok(counts)
}
