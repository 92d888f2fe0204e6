use dnim::sis::{influence, run_diffusion};
use dnim::{DiffusionParams, ParseOptions, TemporalGraph};
use dnim_testkit::timeline_total;
use proptest::prelude::*;

/// `(n, edges, seeds, t_act)`.
type Instance = (usize, Vec<(usize, usize, i64)>, Vec<usize>, i64);

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=10).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((0..n, 0..n, 0i64..60), 0..=30),
            prop::collection::vec(0..n, 0..=3),
            1i64..40,
        )
    })
}

fn deterministic(t_act: i64) -> DiffusionParams {
    DiffusionParams {
        mu: 1.0,
        t_act,
        rng_seed: 0,
    }
}

fn total(g: &TemporalGraph, seeds: &[usize], t_act: i64) -> i64 {
    run_diffusion(g, seeds, &deterministic(t_act))
        .unwrap()
        .0
        .total_active_time()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn matches_timeline_oracle((n, edges, seeds, t_act) in instance()) {
        let g = TemporalGraph::from_edges(n, edges.clone()).unwrap();
        let want = timeline_total(n, &edges, &seeds, g.t_start(), g.t_end(), t_act);
        prop_assert_eq!(total(&g, &seeds, t_act), want);
    }

    #[test]
    fn intervals_are_well_formed((n, edges, seeds, t_act) in instance(), mu in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = TemporalGraph::from_edges(n, edges).unwrap();
        let p = DiffusionParams { mu, t_act, rng_seed: seed };
        let (log, _) = run_diffusion(&g, &seeds, &p).unwrap();
        prop_assert!(log.is_well_formed());
        for v in 0..n {
            for &(s, e) in log.intervals(v) {
                prop_assert!(g.t_start() <= s && s < e && e <= g.t_end());
            }
        }
    }

    #[test]
    fn adding_a_seed_never_hurts((n, edges, seeds, t_act) in instance(), extra in 0usize..10) {
        let g = TemporalGraph::from_edges(n, edges).unwrap();
        let extra = extra % n;
        let mut more = seeds.clone();
        more.push(extra);
        prop_assert!(total(&g, &more, t_act) >= total(&g, &seeds, t_act));
    }

    #[test]
    fn longer_activation_never_hurts((n, edges, seeds, t_act) in instance(), bump in 0i64..30) {
        let g = TemporalGraph::from_edges(n, edges).unwrap();
        prop_assert!(total(&g, &seeds, t_act + bump) >= total(&g, &seeds, t_act));
    }

    #[test]
    fn non_seed_time_bounded_by_successes((n, edges, seeds, t_act) in instance()) {
        let g = TemporalGraph::from_edges(n, edges).unwrap();
        let (log, stats) = run_diffusion(&g, &seeds, &deterministic(t_act)).unwrap();
        let mut seed_time = 0;
        let mut is_seed = vec![false; n];
        for &s in &seeds {
            if !is_seed[s] {
                is_seed[s] = true;
                seed_time += g.duration();
            }
        }
        let non_seed = log.total_active_time() - seed_time;
        prop_assert!(non_seed <= stats.successes as i64 * t_act);
    }

    #[test]
    fn replay_is_bit_identical((n, edges, seeds, t_act) in instance(), seed in any::<u64>()) {
        let g = TemporalGraph::from_edges(n, edges).unwrap();
        let p = DiffusionParams { mu: 0.5, t_act, rng_seed: seed };
        prop_assert_eq!(run_diffusion(&g, &seeds, &p).unwrap(), run_diffusion(&g, &seeds, &p).unwrap());
    }

    #[test]
    fn parsed_edges_are_time_sorted(lines in prop::collection::vec((0i64..20, 0i64..20, -50i64..50), 1..40)) {
        let text: String = lines.iter().map(|(a, b, t)| format!("{a} {b} {t}\n")).collect();
        let g = TemporalGraph::parse_edge_list(text.as_bytes(), &ParseOptions::default()).unwrap();
        prop_assert!(g.edges().windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        prop_assert_eq!(g.edges().len(), lines.len());
    }

    #[test]
    fn drop_loops_removes_every_loop(lines in prop::collection::vec((0i64..5, 0i64..5, 0i64..50), 1..40)) {
        let text: String = lines.iter().map(|(a, b, t)| format!("{a},{b},{t}\n")).collect();
        let opts = ParseOptions { drop_loops: true, ..Default::default() };
        match TemporalGraph::parse_edge_list(text.as_bytes(), &opts) {
            Ok(g) => prop_assert!(g.edges().iter().all(|e| e.src != e.dst)),
            Err(e) => prop_assert!(lines.iter().all(|(a, b, _)| a == b), "{e}"),
        }
    }

    #[test]
    fn edge_list_round_trip(lines in prop::collection::vec((-1000i64..1000, -1000i64..1000, 0i64..1_000_000), 1..40)) {
        let text: String = lines.iter().map(|(a, b, t)| format!("{a}\t{b}\t{t}\n")).collect();
        let g = TemporalGraph::parse_edge_list(text.as_bytes(), &ParseOptions::default()).unwrap();
        let mut out = Vec::new();
        g.write_edge_list(&mut out).unwrap();
        let h = TemporalGraph::parse_edge_list(out.as_slice(), &ParseOptions::default()).unwrap();
        prop_assert_eq!(g.n_nodes(), h.n_nodes());
        let orig = |g: &TemporalGraph| -> Vec<(i64, i64, i64)> {
            let mut v: Vec<_> = g.edges().iter()
                .map(|e| (g.original_id(e.src), g.original_id(e.dst), e.timestamp))
                .collect();
            v.sort_unstable();
            v
        };
        prop_assert_eq!(orig(&g), orig(&h));

        let mut cache = Vec::new();
        g.write_cache(&mut cache).unwrap();
        let c = TemporalGraph::read_cache(cache.as_slice()).unwrap();
        prop_assert_eq!(c.edges(), g.edges());
        prop_assert_eq!(c.original_ids(), g.original_ids());
    }
}

#[test]
fn zero_probability_gives_seed_time_only() {
    let g = TemporalGraph::from_edges(4, vec![(0, 1, 0), (1, 2, 50), (2, 3, 100)]).unwrap();
    let p = DiffusionParams {
        mu: 0.0,
        t_act: 30,
        rng_seed: 7,
    };
    let (log, stats) = run_diffusion(&g, &[0, 2], &p).unwrap();
    assert_eq!(influence(&log, 4), 2.0 * 100.0 / 4.0);
    assert_eq!(stats.successes, 0);
}
