use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::replay::{SeedState, Transition};
use crate::error::{Error, Result};
use crate::graph::{NodeId, TemporalGraph};
use crate::nn::{Bound, Mlp, ParameterSet, Scalar, Tape, Tensor, Var};
use crate::rng;
use crate::tgn::{EmbeddingConfig, GraphPlan, NodeEmbeddings, TgnModule};

const CHECKPOINT_FORMAT: &str = "dnim-qnetwork";
const CHECKPOINT_VERSION: u32 = 1;

/// Architecture of a Q-network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QNetworkConfig {
    pub embedding: EmbeddingConfig,
    /// Use `M₃ = σ(z zᵀ)` with no estimator MLPs.
    pub ablation: bool,
    pub estimator_hidden: Option<usize>,
}

/// JSON sidecar written next to a binary checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub scalar: String,
    pub network: QNetworkConfig,
    pub tensors: Vec<(String, Vec<usize>)>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// Embedding module plus influence estimator, with their parameters.
#[derive(Debug, Clone)]
pub struct QNetwork<T> {
    config: QNetworkConfig,
    params: ParameterSet<T>,
    tgn: TgnModule,
    estimator: Option<(Mlp, Mlp)>,
}

impl<T: Scalar> QNetwork<T> {
    pub fn new(config: &QNetworkConfig, seed: u64) -> Result<Self> {
        let mut params = ParameterSet::new();
        let mut r = rng::stream(seed, 0);
        let tgn = TgnModule::new(&mut params, &config.embedding, &mut r)?;
        let d = config.embedding.dim;
        let hidden = config.estimator_hidden.unwrap_or(d);
        if hidden == 0 {
            return Err(Error::InvalidParam(
                "estimator_hidden must be positive".into(),
            ));
        }
        let estimator = if config.ablation {
            None
        } else {
            Some((
                Mlp::new(&mut params, "est.mlp1", d, hidden, d, &mut r)?,
                Mlp::new(&mut params, "est.mlp2", d, hidden, d, &mut r)?,
            ))
        };
        Ok(Self {
            config: config.clone(),
            params,
            tgn,
            estimator,
        })
    }

    pub fn config(&self) -> &QNetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet<T> {
        &mut self.params
    }

    pub fn tgn(&self) -> &TgnModule {
        &self.tgn
    }

    /// The two estimator MLPs, absent under ablation.
    pub fn estimator(&self) -> Option<&(Mlp, Mlp)> {
        self.estimator.as_ref()
    }

    pub fn plan(&self, g: &TemporalGraph) -> Result<GraphPlan<T>> {
        GraphPlan::new(g, &self.config.embedding)
    }

    /// `1 × N` column sums of `M₃` from an embedding variable.
    pub fn estimator_on_tape(&self, tape: &mut Tape<T>, bound: &Bound, z: Var) -> Result<Var> {
        let (m1, m2) = match &self.estimator {
            Some((a, b)) => (a.forward(tape, bound, z)?, b.forward(tape, bound, z)?),
            None => (z, z),
        };
        let logits = tape.matmul_bt(m1, m2);
        let m3 = tape.sigmoid(logits);
        Ok(tape.col_sum(m3))
    }

    /// Full pipeline from the graph plan to column sums.
    pub fn column_sums_on_tape(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        plan: &GraphPlan<T>,
    ) -> Result<Var> {
        let z = self.tgn.forward(tape, bound, plan)?;
        self.estimator_on_tape(tape, bound, z)
    }

    pub fn embeddings(&self, g: &TemporalGraph) -> Result<NodeEmbeddings<T>> {
        let plan = self.plan(g)?;
        let mut tape = Tape::new();
        let bound = Bound::bind_frozen(&mut tape, &self.params);
        let z = self.tgn.forward(&mut tape, &bound, &plan)?;
        tape.check_finite()?;
        Ok(NodeEmbeddings {
            z: tape.value(z).clone(),
        })
    }

    pub fn column_sums_from_embeddings(&self, z: &NodeEmbeddings<T>) -> Result<Vec<T>> {
        if z.z.cols() != self.config.embedding.dim {
            return Err(Error::shape(
                "column_sums",
                "embedding width does not match network",
            ));
        }
        let mut tape = Tape::new();
        let bound = Bound::bind_frozen(&mut tape, &self.params);
        let zv = tape.constant(z.z.clone());
        let c = self.estimator_on_tape(&mut tape, &bound, zv)?;
        tape.check_finite()?;
        Ok(tape.value(c).data().to_vec())
    }

    pub fn column_sums(&self, plan: &GraphPlan<T>) -> Result<Vec<T>> {
        let mut tape = Tape::new();
        let bound = Bound::bind_frozen(&mut tape, &self.params);
        let c = self.column_sums_on_tape(&mut tape, &bound, plan)?;
        tape.check_finite()?;
        Ok(tape.value(c).data().to_vec())
    }

    /// `(a, Q(S, a))` for every `a ∉ S`, in increasing id order.
    pub fn q_values(&self, z: &NodeEmbeddings<T>, state: &SeedState) -> Result<Vec<(NodeId, T)>> {
        let c = self.column_sums_from_embeddings(z)?;
        q_from_column_sums(&c, state)
    }

    /// Bootstrapped regression targets for a batch, given the online and
    /// target networks' column sums.
    pub fn targets(
        c_online: &[T],
        c_target: &[T],
        batch: &[&Transition],
        gamma: T,
    ) -> Result<Vec<T>> {
        batch
            .iter()
            .map(|t| {
                let r = T::of(t.reward);
                if t.terminal {
                    return Ok(r);
                }
                let next = t.next_state();
                if next.is_full() {
                    return Ok(r);
                }
                let q = q_from_column_sums(c_online, &next)?;
                let best = argmax(&q).expect("non-full state has candidates");
                let base: T = next.nodes().iter().map(|&j| c_target[j]).sum();
                Ok(r + gamma * (base + c_target[best]))
            })
            .collect()
    }

    /// Mean squared error of `Q(s, a | θ)` against gradient-blocked targets.
    pub fn loss_on_tape(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        plan: &GraphPlan<T>,
        batch: &[&Transition],
        c_target: &[T],
        gamma: T,
    ) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::Empty("transition batch"));
        }
        let c = self.column_sums_on_tape(tape, bound, plan)?;
        let c_online = tape.value(c).data().to_vec();
        let n = c_online.len();
        if c_target.len() != n {
            return Err(Error::shape(
                "loss",
                "target column sums do not match graph",
            ));
        }
        let targets = Self::targets(&c_online, c_target, batch, gamma)?;
        let mut sa = vec![T::zero(); batch.len() * n];
        for (row, t) in batch.iter().enumerate() {
            if t.state.n_nodes() != n {
                return Err(Error::shape(
                    "loss",
                    "transition state does not match graph",
                ));
            }
            for &j in t.state.nodes() {
                sa[row * n + j] = T::one();
            }
            sa[row * n + t.action] = T::one();
        }
        let sa = tape.constant(Tensor::matrix(batch.len(), n, sa));
        let q = tape.matmul_bt(sa, c);
        let y = tape.constant(Tensor::matrix(batch.len(), 1, targets));
        let diff = tape.sub(q, y);
        let sq = tape.mul(diff, diff);
        Ok(tape.mean(sq))
    }

    /// Loss value against `target` on graph `g`.
    pub fn compute_loss(
        &self,
        target: &QNetwork<T>,
        g: &TemporalGraph,
        batch: &[&Transition],
        gamma: T,
    ) -> Result<T> {
        let plan = self.plan(g)?;
        let c_target = target.column_sums(&plan)?;
        let mut tape = Tape::new();
        let bound = Bound::bind_frozen(&mut tape, &self.params);
        let loss = self.loss_on_tape(&mut tape, &bound, &plan, batch, &c_target, gamma)?;
        tape.check_finite()?;
        Ok(tape.value(loss).data()[0])
    }

    /// Greedy rollout: repeatedly adds the argmax-Q candidate until `k` seeds.
    pub fn select_seeds_by_policy(&self, g: &TemporalGraph, k: usize) -> Result<Vec<NodeId>> {
        let n = g.n_nodes();
        if k > n {
            return Err(Error::KTooLarge { k, n_nodes: n });
        }
        let plan = self.plan(g)?;
        let c = self.column_sums(&plan)?;
        let mut state = SeedState::new(n);
        let mut order = Vec::with_capacity(k);
        for _ in 0..k {
            let q = q_from_column_sums(&c, &state)?;
            let a = argmax(&q).ok_or(Error::Empty("candidates"))?;
            state.insert(a)?;
            order.push(a);
        }
        Ok(order)
    }

    pub fn manifest(&self, metadata: serde_json::Value) -> CheckpointManifest {
        CheckpointManifest {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            scalar: T::NAME.into(),
            network: self.config.clone(),
            tensors: self.params.manifest(),
            metadata,
        }
    }

    /// Writes the binary checkpoint to `path` and its manifest to
    /// `path.json`.
    pub fn save(&self, path: &Path, metadata: serde_json::Value) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.params.write_checkpoint(&mut w)?;
        std::io::Write::flush(&mut w)?;
        let m = BufWriter::new(File::create(manifest_path(path))?);
        serde_json::to_writer_pretty(m, &self.manifest(metadata))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointManifest)> {
        let m: CheckpointManifest =
            serde_json::from_reader(BufReader::new(File::open(manifest_path(path))?))?;
        if m.format != CHECKPOINT_FORMAT || m.version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint {} v{}",
                m.format, m.version
            )));
        }
        if m.scalar != T::NAME {
            return Err(Error::Format(format!(
                "checkpoint holds {} values, expected {}",
                m.scalar,
                T::NAME
            )));
        }
        let mut net = Self::new(&m.network, 0)?;
        net.params
            .read_checkpoint(BufReader::new(File::open(path)?))?;
        Ok((net, m))
    }
}

pub(crate) fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// `Q(S, a) = Σ_{j ∈ S} c_j + c_a` for each candidate `a ∉ S`.
pub fn q_from_column_sums<T: Scalar>(c: &[T], state: &SeedState) -> Result<Vec<(NodeId, T)>> {
    if c.len() != state.n_nodes() {
        return Err(Error::shape(
            "q_values",
            "state size does not match column sums",
        ));
    }
    if state.is_full() {
        return Err(Error::Empty("candidates"));
    }
    let base: T = state.nodes().iter().map(|&j| c[j]).sum();
    Ok((0..c.len())
        .filter(|&a| !state.contains(a))
        .map(|a| (a, base + c[a]))
        .collect())
}

/// Highest value; ties go to the lowest id.
fn argmax<T: Scalar>(q: &[(NodeId, T)]) -> Option<NodeId> {
    let mut best: Option<(NodeId, T)> = None;
    for &(a, v) in q {
        match best {
            Some((b, bv)) if bv > v || (bv == v && b < a) => {}
            _ => best = Some((a, v)),
        }
    }
    best.map(|b| b.0)
}

/// ε-greedy choice over `(node, Q)` candidates.
pub fn select_action<T: Scalar, R: Rng>(
    q: &[(NodeId, T)],
    epsilon: f64,
    rng: &mut R,
) -> Result<NodeId> {
    if q.is_empty() {
        return Err(Error::Empty("candidates"));
    }
    if rng.gen::<f64>() < epsilon {
        Ok(q[rng.gen_range(0..q.len())].0)
    } else {
        Ok(argmax(q).expect("non-empty"))
    }
}
