use dnim::oracle::{
    estimate_influence, estimate_with_stats, marginal_gain_estimate, InfluenceEstimate,
};
use dnim::{DiffusionParams, TemporalGraph};
use dnim_testkit::random_edges;
use proptest::prelude::*;

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
}

#[test]
fn estimates_do_not_depend_on_worker_count() {
    let mut rng = dnim::rng::stream(3, 0);
    let g = TemporalGraph::from_edges(40, random_edges(&mut rng, 40, 200, 10_000)).unwrap();
    let p = DiffusionParams {
        mu: 0.4,
        t_act: 900,
        rng_seed: 17,
    };
    let run = || {
        let (e, s) = estimate_with_stats(&g, &[1, 5, 9], &p, 500).unwrap();
        let gain = marginal_gain_estimate(&g, &[1, 5], 9, &p, 500, true).unwrap();
        (e, s, gain)
    };
    let base = pool(1).install(run);
    for t in [2, 8] {
        assert_eq!(pool(t).install(run), base, "{t} workers");
    }
}

#[test]
fn zero_probability_closed_form() {
    let mut rng = dnim::rng::stream(4, 0);
    let g = TemporalGraph::from_edges(25, random_edges(&mut rng, 25, 100, 5000)).unwrap();
    let p = DiffusionParams {
        mu: 0.0,
        t_act: 100,
        rng_seed: 9,
    };
    let e = estimate_influence(&g, &[0, 3, 4, 20], &p, 64).unwrap();
    assert_eq!(e.mean, 4.0 * g.duration() as f64 / 25.0);
    assert_eq!(e.std_dev, 0.0);
}

// A -> B at 10 and C -> B at 50 over [0, 100], base {A}, candidate C. Both
// arms are random, so pairing the replications removes the shared noise.
#[test]
fn common_random_numbers_reduce_variance() {
    let g =
        TemporalGraph::from_edges(3, vec![(0, 1, 0), (0, 1, 10), (2, 1, 50), (2, 2, 100)]).unwrap();
    let trials = 200;
    let mut crn = Vec::with_capacity(trials);
    let mut ind = Vec::with_capacity(trials);
    for s in 0..trials as u64 {
        let p = DiffusionParams {
            mu: 0.5,
            t_act: 30,
            rng_seed: s,
        };
        crn.push(
            marginal_gain_estimate(&g, &[0], 2, &p, 20, true)
                .unwrap()
                .mean,
        );
        ind.push(
            marginal_gain_estimate(&g, &[0], 2, &p, 20, false)
                .unwrap()
                .mean,
        );
    }
    let var = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    };
    assert!(
        var(&crn) <= var(&ind),
        "crn {} ind {}",
        var(&crn),
        var(&ind)
    );
}

proptest! {
    #[test]
    fn std_dev_matches_two_pass_formula(totals in prop::collection::vec(-1000i64..1000, 1..50), n in 1usize..20) {
        let e = InfluenceEstimate::from_totals(&totals, n);
        let xs: Vec<f64> = totals.iter().map(|&t| t as f64 / n as f64).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        prop_assert!((e.mean - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
        if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            prop_assert!((e.std_dev - var.sqrt()).abs() <= 1e-9 * (1.0 + var.sqrt()));
        } else {
            prop_assert_eq!(e.std_dev, 0.0);
        }
    }
}
