//! Reference oracles and fixtures shared by the test suites.
//!
//! Everything here is written independently of the library's fast paths:
//! the diffusion oracle walks a per-second timeline, greedy re-evaluates every
//! candidate every round, and the Q oracle evaluates the estimator with plain
//! loops over raw parameter values.

use dnim::nn::{ParameterSet, Scalar};
use dnim::oracle::estimate_influence;
use dnim::{DiffusionParams, NodeId, TemporalGraph};
use rand::Rng;

/// Total active seconds under deterministic diffusion (`mu = 1`), computed on
/// an explicit boolean timeline of every second in `[t_start, t_end)`.
pub fn timeline_total(
    n: usize,
    edges: &[(usize, usize, i64)],
    seeds: &[usize],
    t_start: i64,
    t_end: i64,
    t_act: i64,
) -> i64 {
    let len = (t_end - t_start).max(0) as usize;
    let mut seed = vec![false; n];
    for &s in seeds {
        seed[s] = true;
    }
    let mut on = vec![vec![false; len]; n];
    for v in 0..n {
        if seed[v] {
            on[v].iter_mut().for_each(|x| *x = true);
        }
    }
    let active = |line: &[bool], t: i64| t >= t_start && t < t_end && line[(t - t_start) as usize];

    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| edges[i].2); // stable
    for i in order {
        let (u, v, t) = edges[i];
        if !(seed[u] || active(&on[u], t)) || seed[v] {
            continue;
        }
        let last_end = on[v]
            .iter()
            .rposition(|&x| x)
            .map_or(i64::MIN, |p| t_start + p as i64 + 1);
        let start = t.max(last_end);
        let mut s = start;
        while s < t_end && s < start + t_act {
            on[v][(s - t_start) as usize] = true;
            s += 1;
        }
    }
    on.iter()
        .map(|l| l.iter().filter(|&&x| x).count() as i64)
        .sum()
}

/// Greedy that recomputes every remaining node's gain each round.
/// Gains are `Î(S ∪ {v}) − Î(S)` under shared replication seeds; ties go to
/// the lower id.
pub fn naive_greedy(g: &TemporalGraph, k: usize, p: &DiffusionParams, reps: usize) -> Vec<NodeId> {
    let mut seeds: Vec<NodeId> = Vec::new();
    let mut current = 0.0;
    for _ in 0..k {
        let mut best: Option<(f64, NodeId, f64)> = None;
        for v in 0..g.n_nodes() {
            if seeds.contains(&v) {
                continue;
            }
            let mut s = seeds.clone();
            s.push(v);
            let value = estimate_influence(g, &s, p, reps).unwrap().mean;
            let gain = value - current;
            if best.is_none_or(|(bg, _, _)| gain > bg) {
                best = Some((gain, v, value));
            }
        }
        let (_, v, value) = best.unwrap();
        seeds.push(v);
        current = value;
    }
    seeds
}

/// Random temporal graph with integer timestamps in `[0, horizon)`.
pub fn random_edges<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    horizon: i64,
) -> Vec<(usize, usize, i64)> {
    (0..m)
        .map(|_| {
            (
                rng.gen_range(0..n),
                rng.gen_range(0..n),
                rng.gen_range(0..horizon),
            )
        })
        .collect()
}

/// Hub node id in [`hub_graph`].
pub const HUB: NodeId = 17;

/// 50 nodes over a horizon of about 1000 s. Node [`HUB`] has 40 out-edges at
/// t = 1..=40; 40 further edges among the other nodes fall in `[500, 1000)`.
pub fn hub_graph(seed: u64) -> TemporalGraph {
    let others: Vec<usize> = (0..50).filter(|&v| v != HUB).collect();
    let mut edges: Vec<(usize, usize, i64)> = others
        .iter()
        .take(40)
        .enumerate()
        .map(|(i, &v)| (HUB, v, i as i64 + 1))
        .collect();
    let mut rng = dnim::rng::stream(seed, 0);
    for _ in 0..40 {
        let a = others[rng.gen_range(0..others.len())];
        let b = others[rng.gen_range(0..others.len())];
        edges.push((a, b, rng.gen_range(500..1000)));
    }
    TemporalGraph::from_edges(50, edges).unwrap()
}

/// Dense matrix as rows.
pub type Rows = Vec<Vec<f64>>;

fn param<T: Scalar>(ps: &ParameterSet<T>, name: &str) -> Rows {
    let p = ps
        .by_name(name)
        .unwrap_or_else(|| panic!("missing parameter {name}"));
    let (r, c) = (p.value.rows(), p.value.cols());
    (0..r)
        .map(|i| (0..c).map(|j| p.value.get(i, j).f64()).collect())
        .collect()
}

fn affine(x: &Rows, w: &Rows, b: &[f64]) -> Rows {
    x.iter()
        .map(|row| {
            (0..b.len())
                .map(|j| {
                    b[j] + row
                        .iter()
                        .enumerate()
                        .map(|(i, &xi)| xi * w[i][j])
                        .sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// `relu(x W₁ + b₁) W₂ + b₂` from the named parameters `{prefix}.l1/.l2`.
pub fn mlp_oracle<T: Scalar>(ps: &ParameterSet<T>, prefix: &str, x: &Rows) -> Rows {
    let w1 = param(ps, &format!("{prefix}.l1.w"));
    let b1 = param(ps, &format!("{prefix}.l1.b"));
    let w2 = param(ps, &format!("{prefix}.l2.w"));
    let b2 = param(ps, &format!("{prefix}.l2.b"));
    let h: Rows = affine(x, &w1, &b1[0])
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
        .collect();
    affine(&h, &w2, &b2[0])
}

/// `Σ_{i,j} σ(M₁ M₂ᵀ)[i, j] · sa[j]`: the Q value with `sa` the indicator of
/// `S ∪ {a}`, summed directly over the explicit `N × N` matrix.
pub fn explicit_q(m1: &Rows, m2: &Rows, sa: &[bool]) -> f64 {
    let mut total = 0.0;
    for r1 in m1 {
        for (j, r2) in m2.iter().enumerate() {
            if sa[j] {
                let logit: f64 = r1.iter().zip(r2).map(|(a, b)| a * b).sum();
                total += 1.0 / (1.0 + (-logit).exp());
            }
        }
    }
    total
}

/// Q values for every candidate of `state`, via [`explicit_q`] on the
/// estimator MLPs applied to `z`. With `ablation`, `M₁ = M₂ = z`.
pub fn q_oracle<T: Scalar>(
    ps: &ParameterSet<T>,
    z: &Rows,
    state: &[NodeId],
    ablation: bool,
) -> Vec<(NodeId, f64)> {
    let (m1, m2) = if ablation {
        (z.clone(), z.clone())
    } else {
        (mlp_oracle(ps, "est.mlp1", z), mlp_oracle(ps, "est.mlp2", z))
    };
    let n = z.len();
    (0..n)
        .filter(|a| !state.contains(a))
        .map(|a| {
            let mut sa = vec![false; n];
            for &s in state {
                sa[s] = true;
            }
            sa[a] = true;
            (a, explicit_q(&m1, &m2, &sa))
        })
        .collect()
}

/// Gradient-check fixtures shared by the unit-level and acceptance suites.
pub mod gradients {
    use dnim::agent::{QNetwork, QNetworkConfig, SeedState, Transition};
    use dnim::nn::{
        grad_check, Bound, GradCheckConfig, GradCheckReport, Init, ParameterSet, Tape, Tensor, Var,
    };
    use dnim::tgn::EmbeddingConfig;
    use dnim::{QNetwork64, Result, TemporalGraph};
    use rand::Rng;

    /// Probes every coordinate.
    pub fn full_check() -> GradCheckConfig {
        GradCheckConfig {
            samples_per_param: usize::MAX,
            ..Default::default()
        }
    }

    /// Random parameters plus a fixed random weight per output coordinate,
    /// so each primitive is checked through `mean(W ⊙ op(θ))`.
    struct Fixture {
        ps: ParameterSet<f64>,
        seed: u64,
    }

    impl Fixture {
        fn new(seed: u64, shapes: &[(&str, usize, usize)]) -> Self {
            let mut r = dnim::rng::stream(seed, 0);
            let mut ps = ParameterSet::new();
            for &(name, rows, cols) in shapes {
                let id = ps.add(name, rows, cols, Init::Zeros, &mut r).unwrap();
                let v: Vec<f64> = (0..rows * cols).map(|_| r.gen_range(-1.5..1.5)).collect();
                ps.get_mut(id).value = Tensor::matrix(rows, cols, v);
            }
            Self { ps, seed }
        }

        fn check(&self, op: impl Fn(&mut Tape<f64>, &[Var]) -> Var + Sync) -> f64 {
            let seed = self.seed;
            let f = |tape: &mut Tape<f64>, bound: &Bound| -> Result<Var> {
                let y = op(tape, bound.vars());
                let (m, n) = (tape.value(y).rows(), tape.value(y).cols());
                let mut r = dnim::rng::stream(seed, 1);
                let w: Vec<f64> = (0..m * n).map(|_| r.gen_range(-1.0..1.0)).collect();
                let w = tape.constant(Tensor::matrix(m, n, w));
                let p = tape.mul(y, w);
                Ok(tape.mean(p))
            };
            grad_check(&self.ps, f, &full_check())
                .unwrap()
                .max_rel_error
        }
    }

    /// Maximum relative gradient error of every tape primitive.
    pub fn primitive_errors() -> Vec<(&'static str, f64)> {
        let two = |s| Fixture::new(s, &[("a", 3, 4), ("b", 3, 4)]);
        vec![
            ("add", two(1).check(|t, v| t.add(v[0], v[1]))),
            ("sub", two(2).check(|t, v| t.sub(v[0], v[1]))),
            ("mul", two(3).check(|t, v| t.mul(v[0], v[1]))),
            (
                "matmul",
                Fixture::new(4, &[("a", 3, 4), ("b", 4, 2)]).check(|t, v| t.matmul(v[0], v[1])),
            ),
            (
                "matmul_bt",
                Fixture::new(5, &[("a", 3, 4), ("b", 5, 4)]).check(|t, v| t.matmul_bt(v[0], v[1])),
            ),
            (
                "add_row",
                Fixture::new(6, &[("a", 3, 4), ("b", 1, 4)]).check(|t, v| t.add_row(v[0], v[1])),
            ),
            ("affine", two(7).check(|t, v| t.affine(v[0], -2.5, 0.75))),
            ("relu", two(8).check(|t, v| t.relu(v[0]))),
            ("sigmoid", two(9).check(|t, v| t.sigmoid(v[0]))),
            ("tanh", two(10).check(|t, v| t.tanh(v[0]))),
            ("cos", two(11).check(|t, v| t.cos(v[0]))),
            (
                "concat_cols",
                Fixture::new(12, &[("a", 3, 2), ("b", 3, 5)])
                    .check(|t, v| t.concat_cols(&[v[0], v[1], v[0]])),
            ),
            (
                "gather_rows",
                two(13).check(|t, v| t.gather_rows(v[0], vec![2, 0, 2, 1, 2])),
            ),
            (
                "scatter_rows",
                Fixture::new(14, &[("a", 4, 3), ("b", 2, 3)])
                    .check(|t, v| t.scatter_rows(v[0], vec![3, 1], v[1])),
            ),
            (
                "head_dot",
                Fixture::new(15, &[("a", 5, 6), ("b", 5, 6)])
                    .check(|t, v| t.head_dot(v[0], v[1], 3, 0.7)),
            ),
            (
                "segment_softmax",
                Fixture::new(16, &[("a", 6, 2)])
                    .check(|t, v| t.segment_softmax(v[0], vec![0, 2, 2, 6])),
            ),
            (
                "segment_weighted_sum",
                Fixture::new(17, &[("a", 5, 2), ("b", 5, 4)])
                    .check(|t, v| t.segment_weighted_sum(v[0], v[1], vec![0, 3, 3, 5])),
            ),
            ("col_sum", two(18).check(|t, v| t.col_sum(v[0]))),
            ("mean", two(19).check(|t, v| t.mean(v[0]))),
        ]
    }

    /// Four-wide embedding, one attention layer, batches of three edges.
    pub fn small_embedding() -> EmbeddingConfig {
        EmbeddingConfig {
            dim: 4,
            time_dim: 4,
            layers: 1,
            heads: 2,
            batch_size: 3,
            ..Default::default()
        }
    }

    pub fn small_network(ablation: bool) -> QNetworkConfig {
        QNetworkConfig {
            embedding: small_embedding(),
            ablation,
            estimator_hidden: None,
        }
    }

    /// Nine nodes, 27 random edges.
    pub fn pipeline_graph() -> TemporalGraph {
        let mut r = dnim::rng::stream(8, 0);
        TemporalGraph::from_edges(9, super::random_edges(&mut r, 9, 27, 1000)).unwrap()
    }

    /// Double DQN loss of `net` on `g` (at least 8 nodes) for a fixed batch
    /// mixing empty, partial and terminal states.
    pub fn pipeline_loss<'a>(
        net: &'a QNetwork64,
        g: &TemporalGraph,
    ) -> impl Fn(&mut Tape<f64>, &Bound) -> Result<Var> + Sync + 'a {
        let plan = net.plan(g).unwrap();
        let n = g.n_nodes();
        let c_target: Vec<f64> = (0..n).map(|j| 0.3 * j as f64).collect();
        let batch = [
            Transition::new(SeedState::new(n), 1, 2.0, false).unwrap(),
            Transition::new(SeedState::from_nodes(n, &[0, 3]).unwrap(), 5, 0.5, false).unwrap(),
            Transition::new(SeedState::from_nodes(n, &[2]).unwrap(), 7, 1.25, true).unwrap(),
        ];
        move |tape, bound| {
            let refs: Vec<&Transition> = batch.iter().collect();
            net.loss_on_tape(tape, bound, &plan, &refs, &c_target, 0.9)
        }
    }

    /// Finite-difference check of the loss through estimator, attention,
    /// memory rollout and time encoding.
    pub fn pipeline_check(ablation: bool) -> GradCheckReport {
        let g = pipeline_graph();
        let net = QNetwork::<f64>::new(&small_network(ablation), 11).unwrap();
        grad_check(net.params(), pipeline_loss(&net, &g), &full_check()).unwrap()
    }
}

/// Q-value structure checks against [`q_oracle`].
pub mod qstructure {
    use dnim::agent::SeedState;
    use dnim::nn::Tensor;
    use dnim::tgn::NodeEmbeddings;
    use dnim::QNetwork64;
    use rand::Rng;

    /// Worst relative errors over `draws` parameter draws (both estimator
    /// variants): `(batched vs explicit matrix, Q vs sum of singleton Qs)`.
    pub fn max_errors(draws: u64) -> (f64, f64) {
        let mut worst = (0.0f64, 0.0f64);
        for ablation in [false, true] {
            for draw in 0..draws {
                let net =
                    QNetwork64::new(&super::gradients::small_network(ablation), draw).unwrap();
                let mut r = dnim::rng::stream(draw, 9);
                let n = r.gen_range(2..9);
                let z: Vec<f64> = (0..n * 4).map(|_| r.gen_range(-2.0..2.0)).collect();
                let rows: super::Rows = z.chunks(4).map(<[f64]>::to_vec).collect();
                let z = NodeEmbeddings {
                    z: Tensor::matrix(n, 4, z),
                };
                let mut state = SeedState::new(n);
                for _ in 0..r.gen_range(0..n) {
                    let v = r.gen_range(0..n);
                    if !state.contains(v) {
                        state.insert(v).unwrap();
                    }
                }
                let got = net.q_values(&z, &state).unwrap();
                let want = super::q_oracle(net.params(), &rows, state.nodes(), ablation);
                assert_eq!(got.len(), want.len());
                let singles = net.q_values(&z, &SeedState::new(n)).unwrap();
                for (&(a, q), &(b, w)) in got.iter().zip(&want) {
                    assert_eq!(a, b);
                    worst.0 = worst.0.max((q - w).abs() / w.abs().max(f64::MIN_POSITIVE));
                    let sum: f64 = state
                        .nodes()
                        .iter()
                        .chain([&a])
                        .map(|&j| singles[j].1)
                        .sum();
                    worst.1 = worst
                        .1
                        .max((q - sum).abs() / sum.abs().max(f64::MIN_POSITIVE));
                }
            }
        }
        worst
    }
}

/// The synthetic hub training setup.
pub mod hub {
    use dnim::agent::{AgentConfig, TrainConfig};
    use dnim::tgn::EmbeddingConfig;
    use dnim::DiffusionParams;

    /// Small network, one seed, 500 episodes. Gradient clipping and a slow
    /// exploration decay keep the estimator out of sigmoid saturation long
    /// enough for the hub's reward to register.
    pub fn config(rng_seed: u64) -> TrainConfig {
        TrainConfig {
            agent: AgentConfig {
                k: 1,
                episodes: 500,
                learning_rate: 0.01,
                epsilon_decay: 0.999,
                grad_clip: Some(10.0),
                reward_reps: 50,
                rng_seed,
                ..Default::default()
            },
            embedding: EmbeddingConfig {
                dim: 16,
                time_dim: 16,
                batch_size: 20,
                ..Default::default()
            },
            diffusion: DiffusionParams {
                mu: 0.8,
                t_act: 400,
                rng_seed: 0,
            },
        }
    }
}
