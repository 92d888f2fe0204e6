//! Temporal graph network embedding: a batched memory rollout over the whole
//! edge stream, then one temporal-attention embedding per node over its full
//! interaction history.
//!
//! Memory: edges are cut into consecutive batches. Within a batch every edge
//! `(u, v, t)` yields a message for each endpoint built from the pre-batch
//! memories, `s_u ‖ s_v ‖ enc(Δt)` for `u` and symmetrically for `v`, where
//! `Δt = t − t⁻` is measured from that node's last update. Only the latest
//! message per node survives the batch and drives one GRU update.
//!
//! Embedding: `h⁽⁰⁾ = s′`; each layer attends from `h_i ‖ φ(0)` over
//! `h_j ‖ φ(t_j)` for every incident edge `(j, t_j)` of `i`, then merges with
//! an MLP over `h_i ‖ h̃_i`. Times are normalized to `[0, 1]` over the graph
//! horizon before encoding.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TemporalGraph;
use crate::nn::{
    Bound, GruCell, Mlp, MultiHeadAttention, ParameterSet, Scalar, Tape, Tensor, TimeEncoder, Var,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    /// Memory and embedding width.
    pub dim: usize,
    /// Width of the cosine time encoding.
    pub time_dim: usize,
    /// Attention layers; 0 makes the embedding the final memory.
    pub layers: usize,
    pub heads: usize,
    /// Edges per memory batch.
    pub batch_size: usize,
    /// Keep only the most recent incident edges per node.
    pub neighbor_cap: Option<usize>,
    /// Hidden width of every MLP; defaults to `dim`.
    pub mlp_hidden: Option<usize>,
    /// Use the normalized Δt scalar in messages instead of its encoding.
    pub raw_delta_t: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            time_dim: 64,
            layers: 1,
            heads: 2,
            batch_size: 200,
            neighbor_cap: None,
            mlp_hidden: None,
            raw_delta_t: false,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("time_dim", self.time_dim),
            ("heads", self.heads),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParam(format!(
                    "embedding.{name} must be positive"
                )));
            }
        }
        if self.neighbor_cap == Some(0) || self.mlp_hidden == Some(0) {
            return Err(Error::InvalidParam(
                "embedding caps and widths must be positive".into(),
            ));
        }
        if !(self.dim + self.time_dim).is_multiple_of(self.heads) {
            return Err(Error::InvalidParam(format!(
                "dim + time_dim = {} is not divisible by heads = {}",
                self.dim + self.time_dim,
                self.heads
            )));
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.mlp_hidden.unwrap_or(self.dim)
    }

    fn message_dim(&self) -> usize {
        2 * self.dim + if self.raw_delta_t { 1 } else { self.time_dim }
    }
}

/// Final memory after a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMemoryState<T> {
    /// `N × dim`.
    pub memory: Tensor<T>,
    /// Seconds; `T_s` for nodes never updated.
    pub last_update: Vec<i64>,
    pub update_counts: Vec<usize>,
}

/// `N × dim` embedding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbeddings<T> {
    pub z: Tensor<T>,
}

impl<T: Scalar> NodeEmbeddings<T> {
    pub fn write_csv<W: Write>(&self, g: &TemporalGraph, mut w: W) -> Result<()> {
        let d = self.z.cols();
        let header: Vec<String> = std::iter::once("node".to_string())
            .chain((0..d).map(|i| format!("z{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for v in 0..self.z.rows() {
            let row: Vec<String> = self.z.row(v).iter().map(|x| format!("{x}")).collect();
            writeln!(w, "{},{}", g.original_id(v), row.join(","))?;
        }
        Ok(())
    }
}

struct BatchPlan<T> {
    nodes: Arc<[usize]>,
    others: Arc<[usize]>,
    delta_t: Vec<T>,
}

/// Everything about a graph the forward pass needs that does not depend on
/// parameters. Build once per graph and reuse.
pub struct GraphPlan<T> {
    n_nodes: usize,
    batches: Vec<BatchPlan<T>>,
    nbr_idx: Arc<[usize]>,
    nbr_times: Vec<T>,
    offsets: Arc<[usize]>,
    last_update: Vec<i64>,
    update_counts: Vec<usize>,
}

impl<T: Scalar> GraphPlan<T> {
    pub fn new(g: &TemporalGraph, cfg: &EmbeddingConfig) -> Result<Self> {
        cfg.validate()?;
        let n = g.n_nodes();
        let t_s = g.t_start();
        let span = g.duration().max(1) as f64;
        let norm = |dt: i64| T::of(dt as f64 / span);

        let mut last_update = vec![t_s; n];
        let mut update_counts = vec![0; n];
        let mut batches = Vec::new();
        // latest[v] = (other, t) of v's newest message in the current batch
        let mut latest: Vec<Option<(usize, i64)>> = vec![None; n];
        for chunk in g.edges().chunks(cfg.batch_size) {
            let mut touched = Vec::new();
            for e in chunk {
                for (me, other) in [(e.src, e.dst), (e.dst, e.src)] {
                    if latest[me].is_none() {
                        touched.push(me);
                    }
                    // Edges are time-sorted, so overwriting keeps the max t and,
                    // on ties, the later edge.
                    latest[me] = Some((other, e.timestamp));
                }
            }
            touched.sort_unstable();
            let mut nodes = Vec::with_capacity(touched.len());
            let mut others = Vec::with_capacity(touched.len());
            let mut delta_t = Vec::with_capacity(touched.len());
            for v in touched {
                let (other, t) = latest[v].take().expect("touched node has a message");
                nodes.push(v);
                others.push(other);
                delta_t.push(norm(t - last_update[v]));
                last_update[v] = t;
                update_counts[v] += 1;
            }
            batches.push(BatchPlan {
                nodes: nodes.into(),
                others: others.into(),
                delta_t,
            });
        }

        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut nbr_idx = Vec::new();
        let mut nbr_times = Vec::new();
        for v in 0..n {
            let nbrs = g.temporal_neighbors(v)?;
            let keep = cfg.neighbor_cap.map_or(nbrs.len(), |c| c.min(nbrs.len()));
            for &(u, t) in &nbrs[nbrs.len() - keep..] {
                nbr_idx.push(u);
                nbr_times.push(norm(t - t_s));
            }
            offsets.push(nbr_idx.len());
        }

        Ok(Self {
            n_nodes: n,
            batches,
            nbr_idx: nbr_idx.into(),
            nbr_times,
            offsets: offsets.into(),
            last_update,
            update_counts,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_batches(&self) -> usize {
        self.batches.len()
    }
}

/// Parameterized memory updater and attention stack.
#[derive(Debug, Clone)]
pub struct TgnModule {
    cfg: EmbeddingConfig,
    time: TimeEncoder,
    gru: GruCell,
    layers: Vec<(MultiHeadAttention, Mlp)>,
}

impl TgnModule {
    /// Registers all parameters under the `tgn.` prefix.
    pub fn new<T: Scalar, R: Rng>(
        params: &mut ParameterSet<T>,
        cfg: &EmbeddingConfig,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.dim;
        let wide = d + cfg.time_dim;
        let time = TimeEncoder::new(params, "tgn.time", cfg.time_dim, rng)?;
        let gru = GruCell::new(params, "tgn.gru", cfg.message_dim(), d, rng)?;
        let layers = (0..cfg.layers)
            .map(|l| {
                let attn = MultiHeadAttention::new(
                    params,
                    &format!("tgn.attn{l}"),
                    wide,
                    wide,
                    wide,
                    d,
                    cfg.heads,
                    rng,
                )?;
                let mlp = Mlp::new(
                    params,
                    &format!("tgn.merge{l}"),
                    2 * d,
                    cfg.hidden(),
                    d,
                    rng,
                )?;
                Ok((attn, mlp))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            time,
            gru,
            layers,
        })
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.cfg
    }

    pub fn time_encoder(&self) -> &TimeEncoder {
        &self.time
    }

    pub fn gru(&self) -> &GruCell {
        &self.gru
    }

    pub fn layers(&self) -> &[(MultiHeadAttention, Mlp)] {
        &self.layers
    }

    /// Memory rollout on the tape; returns the `N × dim` final memory.
    pub fn rollout<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        plan: &GraphPlan<T>,
    ) -> Result<Var> {
        let mut mem = tape.constant(Tensor::zeros(&[plan.n_nodes, self.cfg.dim]));
        for b in &plan.batches {
            if b.nodes.is_empty() {
                continue;
            }
            let own = tape.gather_rows(mem, b.nodes.clone());
            let other = tape.gather_rows(mem, b.others.clone());
            let enc = if self.cfg.raw_delta_t {
                tape.constant(Tensor::matrix(b.delta_t.len(), 1, b.delta_t.clone()))
            } else {
                self.time.forward(tape, bound, &b.delta_t)
            };
            let msg = tape.concat_cols(&[own, other, enc]);
            let updated = self.gru.forward(tape, bound, msg, own)?;
            mem = tape.scatter_rows(mem, b.nodes.clone(), updated);
        }
        Ok(mem)
    }

    /// Attention layers over a memory matrix; returns `z`.
    pub fn embed<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        plan: &GraphPlan<T>,
        memory: Var,
    ) -> Result<Var> {
        if self.layers.is_empty() {
            return Ok(memory);
        }
        let phi_nbr = self.time.forward(tape, bound, &plan.nbr_times);
        let phi_zero = self
            .time
            .forward(tape, bound, &vec![T::zero(); plan.n_nodes]);
        let mut h = memory;
        for (attn, mlp) in &self.layers {
            let query = tape.concat_cols(&[h, phi_zero]);
            let nbr_h = tape.gather_rows(h, plan.nbr_idx.clone());
            let kv = tape.concat_cols(&[nbr_h, phi_nbr]);
            let h_tilde =
                attn.forward_segments(tape, bound, query, kv, kv, plan.offsets.clone())?;
            let merged = tape.concat_cols(&[h, h_tilde]);
            h = mlp.forward(tape, bound, merged)?;
        }
        Ok(h)
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        plan: &GraphPlan<T>,
    ) -> Result<Var> {
        let mem = self.rollout(tape, bound, plan)?;
        self.embed(tape, bound, plan, mem)
    }
}

/// Runs the memory rollout and returns the final memory state.
pub fn rollout_memory<T: Scalar>(
    g: &TemporalGraph,
    params: &ParameterSet<T>,
    module: &TgnModule,
) -> Result<NodeMemoryState<T>> {
    let plan = GraphPlan::new(g, module.config())?;
    let mut tape = Tape::new();
    let bound = Bound::bind_frozen(&mut tape, params);
    let mem = module.rollout(&mut tape, &bound, &plan)?;
    tape.check_finite()?;
    Ok(NodeMemoryState {
        memory: tape.value(mem).clone(),
        last_update: plan.last_update.clone(),
        update_counts: plan.update_counts.clone(),
    })
}

/// Embeddings from a finished rollout.
pub fn compute_embeddings<T: Scalar>(
    g: &TemporalGraph,
    mem: &NodeMemoryState<T>,
    params: &ParameterSet<T>,
    module: &TgnModule,
) -> Result<NodeEmbeddings<T>> {
    let plan = GraphPlan::new(g, module.config())?;
    if mem.memory.rows() != g.n_nodes() || mem.memory.cols() != module.config().dim {
        return Err(Error::shape(
            "compute_embeddings",
            "memory does not match graph and config",
        ));
    }
    let mut tape = Tape::new();
    let bound = Bound::bind_frozen(&mut tape, params);
    let m = tape.constant(mem.memory.clone());
    let z = module.embed(&mut tape, &bound, &plan, m)?;
    tape.check_finite()?;
    Ok(NodeEmbeddings {
        z: tape.value(z).clone(),
    })
}
