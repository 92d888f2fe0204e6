use dnim::agent::{
    q_from_column_sums, select_action, train, AgentConfig, QNetwork, SeedState, Transition,
};
use dnim::nn::{Bound, Tape, Tensor};
use dnim::{DiffusionParams, QNetwork32, QNetwork64, TemporalGraph};
use dnim_testkit::gradients::{
    pipeline_check, pipeline_graph, pipeline_loss, small_embedding, small_network,
};
use dnim_testkit::qstructure::max_errors;
use dnim_testkit::random_edges;
use rand::Rng;

const Q_TOL: f64 = 1e-9;
const PIPELINE_TOL: f64 = 1e-4;

fn small_graph(seed: u64, n: usize) -> TemporalGraph {
    let mut r = dnim::rng::stream(seed, 0);
    TemporalGraph::from_edges(n, random_edges(&mut r, n, 3 * n, 1000)).unwrap()
}

fn random_state<R: Rng>(r: &mut R, n: usize) -> SeedState {
    let mut s = SeedState::new(n);
    for _ in 0..r.gen_range(0..n) {
        let v = r.gen_range(0..n);
        if !s.contains(v) {
            s.insert(v).unwrap();
        }
    }
    s
}

#[test]
fn q_values_match_explicit_matrix() {
    let (batched, additive) = max_errors(100);
    assert!(batched < Q_TOL, "{batched:e}");
    assert!(additive < Q_TOL, "{additive:e}");
}

#[test]
fn zero_estimator_gives_half_per_entry() {
    let mut net = QNetwork64::new(&small_network(false), 3).unwrap();
    let names: Vec<String> = net
        .params()
        .iter()
        .map(|p| p.name.clone())
        .filter(|n| n.starts_with("est."))
        .collect();
    assert_eq!(names.len(), 8);
    for name in names {
        let p = net.params_mut().by_name_mut(&name).unwrap();
        p.value = Tensor::zeros(p.value.shape());
    }
    let g = small_graph(1, 7);
    let z = net.embeddings(&g).unwrap();
    let mut r = dnim::rng::stream(1, 1);
    for _ in 0..20 {
        let state = random_state(&mut r, 7);
        for (_, q) in net.q_values(&z, &state).unwrap() {
            assert_eq!(q, (state.len() + 1) as f64 * 7.0 / 2.0);
        }
    }
}

#[test]
fn q_values_are_bounded() {
    let mut r = dnim::rng::stream(2, 0);
    for draw in 0..30u64 {
        let net = QNetwork64::new(&small_network(draw % 2 == 0), draw).unwrap();
        let n = r.gen_range(2..10);
        let g = small_graph(draw, n);
        let z = net.embeddings(&g).unwrap();
        let state = random_state(&mut r, n);
        for (_, q) in net.q_values(&z, &state).unwrap() {
            assert!(q > 0.0 && q < (n * (state.len() + 1)) as f64, "{q}");
        }
    }
}

#[test]
fn greedy_and_uniform_action_choice() {
    let mut r = dnim::rng::stream(4, 0);
    let q = vec![(0, 1.0), (3, 5.0), (5, 5.0), (8, 2.0)];
    for _ in 0..50 {
        assert_eq!(select_action(&q, 0.0, &mut r).unwrap(), 3);
    }

    let cands: Vec<(usize, f64)> = (0..10).map(|a| (a, a as f64)).collect();
    let draws = 10_000;
    let mut counts = [0usize; 10];
    for _ in 0..draws {
        counts[select_action(&cands, 1.0, &mut r).unwrap()] += 1;
    }
    let expected = draws as f64 / 10.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 99.9th percentile of chi-square with 9 degrees of freedom.
    assert!(chi2 < 27.88, "chi2 {chi2}, counts {counts:?}");
}

#[test]
fn bootstrapped_targets() {
    let c_online = [1.0, 3.0, 2.0];
    let c_target = [0.5, 0.25, 4.0];
    let t = Transition::new(SeedState::new(3), 0, 1.0, false).unwrap();
    // s' = {0}; the online net prefers 1 over 2; the target net values it.
    let y = QNetwork64::targets(&c_online, &c_target, &[&t], 0.5).unwrap();
    assert_eq!(y, vec![1.0 + 0.5 * (0.5 + 0.25)]);
    assert_eq!(
        QNetwork64::targets(&c_online, &c_target, &[&t], 0.0).unwrap(),
        vec![1.0]
    );

    let term = Transition::new(SeedState::new(3), 2, 0.75, true).unwrap();
    assert_eq!(
        QNetwork64::targets(&c_online, &c_target, &[&term], 0.9).unwrap(),
        vec![0.75]
    );

    let full = Transition::new(SeedState::from_nodes(3, &[0, 2]).unwrap(), 1, 2.0, false).unwrap();
    assert_eq!(
        QNetwork64::targets(&c_online, &c_target, &[&full], 0.9).unwrap(),
        vec![2.0]
    );
}

#[test]
fn loss_is_mean_squared_error() {
    let g = small_graph(6, 6);
    let online = QNetwork64::new(&small_network(false), 1).unwrap();
    let target = QNetwork64::new(&small_network(false), 2).unwrap();
    let plan = online.plan(&g).unwrap();
    let c = online.column_sums(&plan).unwrap();
    let ct = target.column_sums(&plan).unwrap();

    let terminal = Transition::new(SeedState::from_nodes(6, &[1]).unwrap(), 4, 3.0, true).unwrap();
    let q0 = c[1] + c[4];
    let loss = online
        .compute_loss(&target, &g, &[&terminal], 0.95)
        .unwrap();
    assert!((loss - (3.0 - q0).powi(2)).abs() < 1e-12);

    let open = Transition::new(SeedState::new(6), 2, -1.0, false).unwrap();
    let loss = online.compute_loss(&target, &g, &[&open], 0.0).unwrap();
    assert!((loss - (-1.0 - c[2]).powi(2)).abs() < 1e-12);

    let batch = [&terminal, &open];
    let y = QNetwork64::targets(&c, &ct, &batch, 0.7).unwrap();
    let want = ((q0 - y[0]).powi(2) + (c[2] - y[1]).powi(2)) / 2.0;
    let loss = online.compute_loss(&target, &g, &batch, 0.7).unwrap();
    assert!((loss - want).abs() < 1e-12);
    assert!(online.compute_loss(&target, &g, &[], 0.7).is_err());
}

#[test]
fn full_pipeline_gradients() {
    for ablation in [false, true] {
        let report = pipeline_check(ablation);
        assert!(
            report.max_rel_error < PIPELINE_TOL,
            "ablation={ablation}: {report:?}"
        );
    }
}

#[test]
fn every_parameter_group_receives_gradient() {
    let g = pipeline_graph();
    let net = QNetwork64::new(&small_network(false), 11).unwrap();
    let f = pipeline_loss(&net, &g);
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, net.params());
    let loss = f(&mut tape, &bound).unwrap();
    let grads = tape.backward(loss).unwrap();
    let mut ps = net.params().clone();
    ps.zero_grads();
    ps.accumulate(&bound, &grads);
    for group in [
        "tgn.time",
        "tgn.gru",
        "tgn.attn0",
        "tgn.merge0",
        "est.mlp1",
        "est.mlp2",
    ] {
        let norm: f64 = ps
            .iter()
            .filter(|p| p.name.starts_with(group))
            .flat_map(|p| p.grad.data().iter().map(|g| g * g))
            .sum();
        assert!(norm > 0.0, "{group} receives no gradient");
    }
}

#[test]
fn policy_picks_by_descending_column_sum() {
    let g = small_graph(12, 8);
    let net = QNetwork64::new(&small_network(false), 5).unwrap();
    let c = net.column_sums(&net.plan(&g).unwrap()).unwrap();
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| c[b].partial_cmp(&c[a]).unwrap().then(a.cmp(&b)));
    assert_eq!(net.select_seeds_by_policy(&g, 3).unwrap(), order[..3]);
    assert_eq!(net.select_seeds_by_policy(&g, 8).unwrap(), order);
    assert!(net.select_seeds_by_policy(&g, 9).is_err());
    assert!(q_from_column_sums(&c, &SeedState::from_nodes(8, &order).unwrap()).is_err());
}

fn quick_agent() -> AgentConfig {
    AgentConfig {
        k: 2,
        episodes: 12,
        batch_size: 4,
        target_sync: 5,
        reward_reps: 8,
        rng_seed: 21,
        ..Default::default()
    }
}

fn diffusion() -> DiffusionParams {
    DiffusionParams {
        mu: 0.6,
        t_act: 200,
        rng_seed: 0,
    }
}

#[test]
fn zero_episodes_train_nothing() {
    let g = small_graph(13, 8);
    let cfg = AgentConfig {
        episodes: 0,
        ..quick_agent()
    };
    let (net, log) = train::<f64>(&g, &cfg, &small_embedding(), &diffusion()).unwrap();
    assert!(log.episodes.is_empty());
    assert_eq!((log.gradient_steps, log.target_syncs), (0, 0));

    // With every reward filtered out the buffer stays empty.
    let blocked = AgentConfig {
        reward_threshold: f64::INFINITY,
        ..quick_agent()
    };
    let (same, log) = train::<f64>(&g, &blocked, &small_embedding(), &diffusion()).unwrap();
    assert_eq!(log.gradient_steps, 0);
    assert!(log.episodes.iter().all(|e| e.loss.is_none()));
    assert!(same.params().bitwise_eq(net.params()));
}

#[test]
fn training_is_reproducible() {
    let g = small_graph(14, 8);
    let run = || train::<f64>(&g, &quick_agent(), &small_embedding(), &diffusion()).unwrap();
    let (a, la) = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(run);
    let (b, lb) = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap()
        .install(run);
    assert_eq!(la, lb);
    assert!(a.params().bitwise_eq(b.params()));
    assert!(la.gradient_steps > 0);
    assert_eq!(la.target_syncs, 12 / 5);
    for (m, e) in la.episodes.iter().enumerate() {
        assert_eq!(e.episode, m);
        assert_eq!(e.epsilon, quick_agent().epsilon(m));
    }
    let mut csv = Vec::new();
    la.write_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("episode,return,loss,epsilon\n"));
    assert_eq!(csv.lines().count(), 13);

    let adam = AgentConfig {
        optimizer: dnim::agent::Optimizer::Adam,
        ..quick_agent()
    };
    let (c, _) = train::<f64>(&g, &adam, &small_embedding(), &diffusion()).unwrap();
    assert!(!c.params().bitwise_eq(a.params()));
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.bin");
    let net = QNetwork64::new(&small_network(false), 31).unwrap();
    net.save(&path, serde_json::json!({"episodes": 3})).unwrap();
    let (back, manifest) = QNetwork64::load(&path).unwrap();
    assert!(back.params().bitwise_eq(net.params()));
    assert_eq!(back.config(), net.config());
    assert_eq!(manifest.metadata["episodes"], 3);
    assert_eq!(manifest.scalar, "f64");

    let g = small_graph(15, 6);
    assert_eq!(
        back.select_seeds_by_policy(&g, 3).unwrap(),
        net.select_seeds_by_policy(&g, 3).unwrap()
    );
    assert!(QNetwork32::load(&path).is_err());

    let single = QNetwork::<f32>::new(&small_network(true), 31).unwrap();
    let path32 = dir.path().join("net32.bin");
    single.save(&path32, serde_json::Value::Null).unwrap();
    assert!(QNetwork32::load(&path32)
        .unwrap()
        .0
        .params()
        .bitwise_eq(single.params()));
    assert!(QNetwork64::load(&path32).is_err());
}
