use std::f64::consts::PI;

use dnim::nn::{
    grad_check, Bound, GruCell, Init, Mlp, MultiHeadAttention, ParameterSet, Tape, Tensor,
    TimeEncoder, Var,
};
use dnim::{Result, Tensor64};
use dnim_testkit::gradients::{full_check, primitive_errors};
use rand::Rng;

const PRIMITIVE_TOL: f64 = 1e-6;
const COMPOSITE_TOL: f64 = 1e-4;

fn set(ps: &mut ParameterSet<f64>, name: &str, rows: usize, cols: usize, data: &[f64]) {
    ps.by_name_mut(name).unwrap().value = Tensor::matrix(rows, cols, data.to_vec());
}

#[test]
fn primitive_gradients() {
    for (name, err) in primitive_errors() {
        assert!(err < PRIMITIVE_TOL, "{name}: relative error {err:e}");
    }
}

#[test]
fn grad_check_examples() {
    let mut ps = ParameterSet::<f64>::new();
    let mut r = dnim::rng::stream(30, 0);
    ps.add("w", 4, 3, Init::Glorot, &mut r).unwrap();
    let squares = |tape: &mut Tape<f64>, b: &Bound| -> Result<Var> {
        let w = b.vars()[0];
        let sq = tape.mul(w, w);
        let s = tape.mean(sq);
        Ok(tape.affine(s, 12.0, 0.0))
    };
    assert!(
        grad_check(&ps, squares, &full_check())
            .unwrap()
            .max_rel_error
            < 1e-8
    );

    let constant = |tape: &mut Tape<f64>, _: &Bound| -> Result<Var> {
        Ok(tape.constant(Tensor::matrix(1, 1, vec![3.0])))
    };
    let report = grad_check(&ps, constant, &full_check()).unwrap();
    assert_eq!(report.max_rel_error, 0.0);
    assert_eq!(report.analytic, 0.0);
    assert_eq!(report.numeric, 0.0);
}

#[test]
fn layer_gradients() {
    let mut r = dnim::rng::stream(40, 0);
    let mut ps = ParameterSet::<f64>::new();
    let time = TimeEncoder::new(&mut ps, "time", 3, &mut r).unwrap();
    let gru = GruCell::new(&mut ps, "gru", 5, 4, &mut r).unwrap();
    let attn = MultiHeadAttention::new(&mut ps, "attn", 4, 4, 4, 3, 2, &mut r).unwrap();
    let mlp = Mlp::new(&mut ps, "mlp", 7, 5, 2, &mut r).unwrap();
    // Moderate frequencies keep the finite differences well conditioned.
    set(&mut ps, "time.omega", 1, 3, &[1.0, 2.5, 4.0]);
    set(&mut ps, "time.bias", 1, 3, &[0.1, -0.2, 0.3]);

    let msg: Vec<f64> = (0..3 * 2).map(|_| r.gen_range(-1.0..1.0)).collect();
    let state: Vec<f64> = (0..3 * 4).map(|_| r.gen_range(-1.0..1.0)).collect();
    let f = |tape: &mut Tape<f64>, b: &Bound| -> Result<Var> {
        let enc = time.forward(tape, b, &[0.1, 0.5, 0.9]);
        let m = tape.constant(Tensor::matrix(3, 2, msg.clone()));
        let message = tape.concat_cols(&[m, enc]);
        let s = tape.constant(Tensor::matrix(3, 4, state.clone()));
        let h = gru.forward(tape, b, message, s)?;
        let keys = tape.gather_rows(h, vec![1, 2, 0, 2]);
        let att = attn.forward_segments(tape, b, h, keys, keys, vec![0, 2, 2, 4].into())?;
        let x = tape.concat_cols(&[h, att]);
        let y = mlp.forward(tape, b, x)?;
        let y = tape.tanh(y);
        Ok(tape.mean(y))
    };
    let report = grad_check(&ps, f, &full_check()).unwrap();
    assert!(report.max_rel_error < COMPOSITE_TOL, "{report:?}");
}

#[test]
fn time_encoding_examples() {
    let mut r = dnim::rng::stream(0, 0);
    let mut ps = ParameterSet::<f64>::new();
    let enc = TimeEncoder::new(&mut ps, "time", 4, &mut r).unwrap();
    let eval = |ps: &ParameterSet<f64>, t: f64| -> Vec<f64> {
        let mut tape = Tape::new();
        let b = Bound::bind_frozen(&mut tape, ps);
        let y = enc.forward(&mut tape, &b, &[t]);
        tape.value(y).data().to_vec()
    };
    assert_eq!(eval(&ps, 0.0), vec![1.0; 4]);

    set(&mut ps, "time.omega", 1, 4, &[0.0; 4]);
    set(&mut ps, "time.bias", 1, 4, &[0.0, 1.0, -2.0, 3.0]);
    let want: Vec<f64> = [0.0f64, 1.0, -2.0, 3.0].iter().map(|b| b.cos()).collect();
    assert_eq!(eval(&ps, 0.3), want);
    assert_eq!(eval(&ps, 0.9), want);

    let mut ps1 = ParameterSet::<f64>::new();
    let enc1 = TimeEncoder::new(&mut ps1, "time", 1, &mut r).unwrap();
    set(&mut ps1, "time.omega", 1, 1, &[PI]);
    let mut tape = Tape::new();
    let b = Bound::bind_frozen(&mut tape, &ps1);
    let y = enc1.forward(&mut tape, &b, &[1.0]);
    assert!((tape.value(y).data()[0] + 1.0).abs() < 1e-15);
}

#[test]
fn attention_two_key_mix() {
    let mut r = dnim::rng::stream(0, 0);
    let mut ps = ParameterSet::<f64>::new();
    let attn = MultiHeadAttention::new(&mut ps, "attn", 1, 1, 1, 1, 1, &mut r).unwrap();
    for w in ["w_q", "w_k", "w_v", "w_o"] {
        set(&mut ps, &format!("attn.{w}"), 1, 1, &[1.0]);
    }
    let mut tape = Tape::new();
    let b = Bound::bind_frozen(&mut tape, &ps);
    let q = tape.constant(Tensor::matrix(1, 1, vec![1.0]));
    let k = tape.constant(Tensor::matrix(2, 1, vec![0.0, 1.0]));
    let v = tape.constant(Tensor::matrix(2, 1, vec![2.0, 4.0]));
    let out = attn.forward(&mut tape, &b, q, k, v).unwrap();
    // scores (0, 1), weights (1, e) / (1 + e)
    let e = 1f64.exp();
    let want = (2.0 + 4.0 * e) / (1.0 + e);
    assert!((tape.value(out).data()[0] - want).abs() < 1e-14);

    let empty = tape.constant(Tensor::zeros(&[0, 1]));
    assert!(attn.forward(&mut tape, &b, q, empty, empty).is_err());
}

#[test]
fn attention_ignores_key_order() {
    let mut r = dnim::rng::stream(50, 0);
    let mut ps = ParameterSet::<f64>::new();
    let attn = MultiHeadAttention::new(&mut ps, "attn", 3, 5, 6, 4, 3, &mut r).unwrap();
    for trial in 0..20u64 {
        let mut g = dnim::rng::stream(trial, 7);
        let n = g.gen_range(1..8);
        let q: Vec<f64> = (0..3).map(|_| g.gen_range(-2.0..2.0)).collect();
        let kv: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| g.gen_range(-2.0..2.0)).collect())
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut g);
        let run = |order: &[usize]| -> Vec<f64> {
            let mut tape = Tape::new();
            let b = Bound::bind_frozen(&mut tape, &ps);
            let qv = tape.constant(Tensor::matrix(1, 3, q.clone()));
            let rows: Vec<f64> = order.iter().flat_map(|&i| kv[i].clone()).collect();
            let k = tape.constant(Tensor::matrix(n, 5, rows));
            let out = attn.forward(&mut tape, &b, qv, k, k).unwrap();
            tape.value(out).data().to_vec()
        };
        let a = run(&(0..n).collect::<Vec<_>>());
        let p = run(&perm);
        for (x, y) in a.iter().zip(&p) {
            assert!((x - y).abs() < 1e-12, "trial {trial}: {a:?} vs {p:?}");
        }
    }
}

#[test]
fn gru_matches_scalar_formula() {
    let mut r = dnim::rng::stream(0, 0);
    let mut ps = ParameterSet::<f64>::new();
    let gru = GruCell::new(&mut ps, "gru", 1, 1, &mut r).unwrap();
    let vals = [
        ("w_z", 0.3),
        ("u_z", -0.4),
        ("b_z", 0.1),
        ("w_r", 0.7),
        ("u_r", 0.2),
        ("b_r", -0.3),
        ("w_h", -0.6),
        ("u_h", 0.9),
        ("b_h", 0.05),
    ];
    for (n, v) in vals {
        set(&mut ps, &format!("gru.{n}"), 1, 1, &[v]);
    }
    let (x, s) = (0.8, -0.5);
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let z = sig(0.3 * x - 0.4 * s + 0.1);
    let rr = sig(0.7 * x + 0.2 * s - 0.3);
    let h = (-0.6 * x + 0.9 * (rr * s) + 0.05).tanh();
    let want = (1.0 - z) * s + z * h;

    let mut tape = Tape::new();
    let b = Bound::bind_frozen(&mut tape, &ps);
    let xm = tape.constant(Tensor::matrix(1, 1, vec![x]));
    let sm = tape.constant(Tensor::matrix(1, 1, vec![s]));
    let out = gru.forward(&mut tape, &b, xm, sm).unwrap();
    assert!((tape.value(out).data()[0] - want).abs() < 1e-15);

    // All-zero parameters halve the state.
    let mut zero = ps.clone();
    for (n, _) in vals {
        set(&mut zero, &format!("gru.{n}"), 1, 1, &[0.0]);
    }
    let mut tape = Tape::new();
    let b = Bound::bind_frozen(&mut tape, &zero);
    let xm = tape.constant(Tensor::matrix(1, 1, vec![x]));
    let sm = tape.constant(Tensor::matrix(1, 1, vec![s]));
    let out = gru.forward(&mut tape, &b, xm, sm).unwrap();
    assert_eq!(tape.value(out).data()[0], s / 2.0);
}

#[test]
fn mlp_matches_hand_evaluation() {
    let mut r = dnim::rng::stream(0, 0);
    let mut ps = ParameterSet::<f64>::new();
    let mlp = Mlp::new(&mut ps, "m", 2, 2, 1, &mut r).unwrap();
    set(&mut ps, "m.l1.w", 2, 2, &[1.0, -1.0, 2.0, 0.5]);
    set(&mut ps, "m.l1.b", 1, 2, &[0.0, -3.0]);
    set(&mut ps, "m.l2.w", 2, 1, &[2.0, 5.0]);
    set(&mut ps, "m.l2.b", 1, 1, &[0.25]);
    let mut tape = Tape::new();
    let b = Bound::bind_frozen(&mut tape, &ps);
    let x = tape.constant(Tensor::matrix(1, 2, vec![1.0, 1.0]));
    let y = mlp.forward(&mut tape, &b, x).unwrap();
    // hidden: (1 + 2, -1 + 0.5 - 3) = (3, -3.5) -> relu (3, 0)
    assert_eq!(tape.value(y).data(), &[2.0 * 3.0 + 0.25]);
    let bad = tape.constant(Tensor64::zeros(&[1, 3]));
    assert!(mlp.forward(&mut tape, &b, bad).is_err());
}

#[test]
fn single_precision_forward_tracks_double() {
    let mut r = dnim::rng::stream(60, 0);
    let mut ps = ParameterSet::<f64>::new();
    let mlp = Mlp::new(&mut ps, "m", 4, 8, 3, &mut r).unwrap();
    let x: Vec<f64> = (0..8).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut ps32 = ParameterSet::<f32>::new();
    let mlp32 = Mlp::new(&mut ps32, "m", 4, 8, 3, &mut r).unwrap();
    for p in ps.iter() {
        ps32.by_name_mut(&p.name).unwrap().value = p.value.cast();
    }
    let mut t64 = Tape::new();
    let b64 = Bound::bind_frozen(&mut t64, &ps);
    let x64 = t64.constant(Tensor::matrix(2, 4, x.clone()));
    let y64 = mlp.forward(&mut t64, &b64, x64).unwrap();
    let mut t32 = Tape::new();
    let b32 = Bound::bind_frozen(&mut t32, &ps32);
    let x32 = t32.constant(Tensor::matrix(2, 4, x.iter().map(|&v| v as f32).collect()));
    let y32 = mlp32.forward(&mut t32, &b32, x32).unwrap();
    for (a, b) in t64.value(y64).data().iter().zip(t32.value(y32).data()) {
        assert!((a - *b as f64).abs() < 1e-5);
    }
}
