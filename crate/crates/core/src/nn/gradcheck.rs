use rand::seq::index;
use rayon::prelude::*;

use super::{Bound, ParameterSet, Scalar, Tape, Var};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Coordinates probed per parameter tensor (all of them if the tensor is smaller).
    pub samples_per_param: usize,
    /// Lower bound on the denominator of the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            samples_per_param: 8,
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `name[index]` of the worst coordinate.
    pub worst: String,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

fn evaluate<T: Scalar, F>(params: &ParameterSet<T>, f: &F) -> Result<f64>
where
    F: Fn(&mut Tape<T>, &Bound) -> Result<Var>,
{
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, params);
    let out = f(&mut tape, &bound)?;
    tape.check_finite()?;
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(Error::shape("grad_check", "function must return a scalar"));
    }
    Ok(v.data()[0].f64())
}

/// Compares the tape gradient of the scalar `f` with central differences
/// `(f(θ+εe) − f(θ−εe)) / 2ε` on a sampled subset of coordinates.
///
/// Relative error is `|a − n| / max(|a|, |n|, floor)`.
pub fn grad_check<T: Scalar, F>(
    params: &ParameterSet<T>,
    f: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<T>, &Bound) -> Result<Var> + Sync,
{
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, params);
    let out = f(&mut tape, &bound)?;
    let grads = tape.backward(out)?;

    let mut rng = rng::stream(cfg.seed, 0);
    let mut coords = Vec::new();
    for (pi, p) in params.iter().enumerate() {
        let n = p.value.len();
        let chosen: Vec<usize> = if n <= cfg.samples_per_param {
            (0..n).collect()
        } else {
            index::sample(&mut rng, n, cfg.samples_per_param).into_vec()
        };
        let g = grads.get(bound.vars()[pi]);
        for i in chosen {
            let a = g.map_or(0.0, |g| g.data()[i].f64());
            coords.push((pi, i, a));
        }
    }

    let probes: Vec<Result<(usize, usize, f64, f64)>> = coords
        .par_iter()
        .map(|&(pi, i, a)| {
            let mut plus = params.clone();
            let mut minus = params.clone();
            let id = plus
                .iter()
                .nth(pi)
                .map(|p| p.name.clone())
                .expect("index in range");
            let base = params.by_name(&id).unwrap().value.data()[i].f64();
            plus.by_name_mut(&id).unwrap().value.data_mut()[i] = T::of(base + cfg.eps);
            minus.by_name_mut(&id).unwrap().value.data_mut()[i] = T::of(base - cfg.eps);
            let num = (evaluate(&plus, &f)? - evaluate(&minus, &f)?) / (2.0 * cfg.eps);
            Ok((pi, i, a, num))
        })
        .collect();

    let names: Vec<&str> = params.iter().map(|p| p.name.as_str()).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: String::new(),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for probe in probes {
        let (pi, i, a, n) = probe?;
        if !n.is_finite() {
            return Err(Error::NonFinite("finite difference".into()));
        }
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(cfg.floor);
        report.checked += 1;
        if rel >= report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = format!("{}[{i}]", names[pi]);
            report.analytic = a;
            report.numeric = n;
        }
    }
    Ok(report)
}
