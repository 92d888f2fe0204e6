//! Reverse-mode differentiation over whole-tensor operations.
//!
//! A [`Tape`] records every operation of one forward pass; [`Tape::backward`]
//! walks it in reverse and returns the gradient of a scalar output with
//! respect to every recorded node.

use std::sync::Arc;

use super::tensor::{mm_nn, mm_nt, mm_tn};
use super::{ParameterSet, Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Affine(Var, T),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Cos(Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Arc<[usize]>),
    ScatterRows(Var, Arc<[usize]>, Var),
    HeadDot(Var, Var, usize, T),
    SegmentSoftmax(Var, Arc<[usize]>),
    SegmentWeightedSum(Var, Var, Arc<[usize]>),
    ColSum(Var),
    Mean(Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    nonfinite: Option<(usize, &'static str)>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            nonfinite: None,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(
        &mut self,
        value: Tensor<T>,
        op: Op<T>,
        requires_grad: bool,
        name: &'static str,
    ) -> Var {
        if self.nonfinite.is_none() && !value.all_finite() {
            self.nonfinite = Some((self.nodes.len(), name));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true, "leaf")
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false, "constant")
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Errors if any recorded value is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self.nonfinite {
            None => Ok(()),
            Some((i, name)) => Err(Error::NonFinite(format!("{name} (node {i})"))),
        }
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let ((m, k), (k2, n)) = (self.dims(a), self.dims(b));
        assert_eq!(k, k2, "matmul {m}x{k} · {k2}x{n}");
        let out = mm_nn(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::matrix(m, n, out), Op::MatMul(a, b), rg, "matmul")
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let ((m, k), (n, k2)) = (self.dims(a), self.dims(b));
        assert_eq!(k, k2, "matmul_bt {m}x{k} · ({n}x{k2})ᵀ");
        let out = mm_nt(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        self.push(
            Tensor::matrix(m, n, out),
            Op::MatMulBt(a, b),
            rg,
            "matmul_bt",
        )
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        op: Op<T>,
        name: &'static str,
        f: impl Fn(T, T) -> T,
    ) -> Var {
        assert_eq!(self.dims(a), self.dims(b), "{name} shape");
        let out = self.value(a).zip_map(self.value(b), f);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, op, rg, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a, b), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a, b), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a, b), "mul", |x, y| x * y)
    }

    /// Adds the `1 × c` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (m, n) = self.dims(a);
        assert_eq!(self.dims(bias), (1, n), "add_row bias");
        let mut out = self.value(a).clone();
        let b = self.value(bias).data().to_vec();
        for r in out.data_mut().chunks_mut(n.max(1)).take(m) {
            for (x, &y) in r.iter_mut().zip(&b) {
                *x += y;
            }
        }
        let rg = self.rg(a) || self.rg(bias);
        self.push(out, Op::AddRow(a, bias), rg, "add_row")
    }

    /// `scale · a + shift`.
    pub fn affine(&mut self, a: Var, scale: T, shift: T) -> Var {
        let out = self.value(a).map(|x| scale * x + shift);
        let rg = self.rg(a);
        self.push(out, Op::Affine(a, scale), rg, "affine")
    }

    fn unary(&mut self, a: Var, op: Op<T>, name: &'static str, f: impl Fn(T) -> T) -> Var {
        let out = self.value(a).map(f);
        let rg = self.rg(a);
        self.push(out, op, rg, name)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), "relu", |x| x.max(T::zero()))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), "sigmoid", sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), "tanh", |x| x.tanh())
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, Op::Cos(a), "cos", |x| x.cos())
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let m = self.dims(parts[0]).0;
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (r, c) = self.dims(p);
                assert_eq!(r, m, "concat_cols row count");
                c
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(
            Tensor::matrix(m, total, out),
            Op::ConcatCols(parts.to_vec()),
            rg,
            "concat_cols",
        )
    }

    /// Row `i` of the output is row `idx[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, idx: impl Into<Arc<[usize]>>) -> Var {
        let idx = idx.into();
        let (m, n) = self.dims(a);
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(idx.len() * n);
        for &i in idx.iter() {
            assert!(i < m, "gather_rows index {i} >= {m}");
            out.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        let rg = self.rg(a);
        self.push(
            Tensor::matrix(idx.len(), n, out),
            Op::GatherRows(a, idx),
            rg,
            "gather_rows",
        )
    }

    /// Copy of `base` with row `idx[i]` replaced by row `i` of `rows`.
    /// Indices must be distinct.
    pub fn scatter_rows(&mut self, base: Var, idx: impl Into<Arc<[usize]>>, rows: Var) -> Var {
        let idx = idx.into();
        let (m, n) = self.dims(base);
        assert_eq!(self.dims(rows), (idx.len(), n), "scatter_rows rows");
        let mut out = self.value(base).clone();
        {
            let src = self.nodes[rows.0].value.data().to_vec();
            let dst = out.data_mut();
            for (r, &i) in idx.iter().enumerate() {
                assert!(i < m, "scatter_rows index {i} >= {m}");
                dst[i * n..(i + 1) * n].copy_from_slice(&src[r * n..(r + 1) * n]);
            }
        }
        let rg = self.rg(base) || self.rg(rows);
        self.push(out, Op::ScatterRows(base, idx, rows), rg, "scatter_rows")
    }

    /// Per-head scaled dot products of matching rows: `E×D, E×D -> E×H`.
    pub fn head_dot(&mut self, a: Var, b: Var, heads: usize, scale: T) -> Var {
        let (e, d) = self.dims(a);
        assert_eq!(self.dims(b), (e, d), "head_dot shapes");
        assert!(
            heads > 0 && d % heads == 0,
            "head_dot: {d} not divisible by {heads}"
        );
        let dh = d / heads;
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![T::zero(); e * heads];
        for r in 0..e {
            for h in 0..heads {
                let lo = r * d + h * dh;
                let s = av[lo..lo + dh]
                    .iter()
                    .zip(&bv[lo..lo + dh])
                    .fold(T::zero(), |s, (&x, &y)| s + x * y);
                out[r * heads + h] = s * scale;
            }
        }
        let rg = self.rg(a) || self.rg(b);
        self.push(
            Tensor::matrix(e, heads, out),
            Op::HeadDot(a, b, heads, scale),
            rg,
            "head_dot",
        )
    }

    /// Column-wise softmax within each row segment `offsets[s]..offsets[s+1]`.
    pub fn segment_softmax(&mut self, x: Var, offsets: impl Into<Arc<[usize]>>) -> Var {
        let offsets = offsets.into();
        let (e, h) = self.dims(x);
        assert_eq!(*offsets.last().unwrap_or(&0), e, "segment_softmax offsets");
        let xv = self.value(x).data();
        let mut out = vec![T::zero(); e * h];
        for w in offsets.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if lo == hi {
                continue;
            }
            for c in 0..h {
                let mx = (lo..hi).fold(T::neg_infinity(), |m, r| m.max(xv[r * h + c]));
                let mut z = T::zero();
                for r in lo..hi {
                    let ex = (xv[r * h + c] - mx).exp();
                    out[r * h + c] = ex;
                    z += ex;
                }
                for r in lo..hi {
                    out[r * h + c] /= z;
                }
            }
        }
        let rg = self.rg(x);
        self.push(
            Tensor::matrix(e, h, out),
            Op::SegmentSoftmax(x, offsets),
            rg,
            "segment_softmax",
        )
    }

    /// `out[s, c] = Σ_{e ∈ segment s} alpha[e, head(c)] · v[e, c]`, one row per
    /// segment; empty segments give zero rows.
    pub fn segment_weighted_sum(
        &mut self,
        alpha: Var,
        v: Var,
        offsets: impl Into<Arc<[usize]>>,
    ) -> Var {
        let offsets = offsets.into();
        let (e, heads) = self.dims(alpha);
        let (e2, d) = self.dims(v);
        assert_eq!(e, e2, "segment_weighted_sum rows");
        assert!(heads > 0 && d % heads == 0, "segment_weighted_sum heads");
        assert_eq!(
            *offsets.last().unwrap_or(&0),
            e,
            "segment_weighted_sum offsets"
        );
        let dh = d / heads;
        let s = offsets.len() - 1;
        let (av, vv) = (self.value(alpha).data(), self.value(v).data());
        let mut out = vec![T::zero(); s * d];
        for (seg, w) in offsets.windows(2).enumerate() {
            let o = &mut out[seg * d..(seg + 1) * d];
            for r in w[0]..w[1] {
                for (c, oc) in o.iter_mut().enumerate() {
                    *oc += av[r * heads + c / dh] * vv[r * d + c];
                }
            }
        }
        let rg = self.rg(alpha) || self.rg(v);
        self.push(
            Tensor::matrix(s, d, out),
            Op::SegmentWeightedSum(alpha, v, offsets),
            rg,
            "segment_weighted_sum",
        )
    }

    /// `1 × c` column sums.
    pub fn col_sum(&mut self, a: Var) -> Var {
        let (m, n) = self.dims(a);
        let mut out = vec![T::zero(); n];
        let av = self.value(a).data();
        for r in 0..m {
            for (o, &x) in out.iter_mut().zip(&av[r * n..(r + 1) * n]) {
                *o += x;
            }
        }
        let rg = self.rg(a);
        self.push(Tensor::row_vector(out), Op::ColSum(a), rg, "col_sum")
    }

    /// `1 × 1` mean of all entries.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = T::of(t.len() as f64);
        let s = t.data().iter().fold(T::zero(), |s, &x| s + x);
        let rg = self.rg(a);
        self.push(Tensor::matrix(1, 1, vec![s / n]), Op::Mean(a), rg, "mean")
    }

    /// Gradients of the `1 × 1` node `out` with respect to every node.
    pub fn backward(&self, out: Var) -> Result<Gradients<T>> {
        self.check_finite()?;
        let ov = self.value(out);
        if ov.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("output has {} elements", ov.len()),
            ));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; out.0 + 1];
        grads[out.0] = Some(Tensor::full(ov.shape(), T::one()));

        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let (before, rest) = grads.split_at_mut(i);
            let Some(g) = rest[0].as_ref() else { continue };
            self.propagate(node, g, before);
        }
        if grads.iter().flatten().any(|g| !g.all_finite()) {
            return Err(Error::NonFinite("backward".into()));
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, acc: &mut [Option<Tensor<T>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut send = |v: Var, t: Tensor<T>| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut acc[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.cols());
                if self.rg(*a) {
                    send(*a, Tensor::matrix(m, k, mm_nt(gd, bv.data(), m, n, k)));
                }
                if self.rg(*b) {
                    send(*b, Tensor::matrix(k, n, mm_tn(av.data(), gd, m, k, n)));
                }
            }
            Op::MatMulBt(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k, n) = (av.rows(), av.cols(), bv.rows());
                if self.rg(*a) {
                    send(*a, Tensor::matrix(m, k, mm_nn(gd, bv.data(), m, n, k)));
                }
                if self.rg(*b) {
                    send(*b, Tensor::matrix(n, k, mm_tn(gd, av.data(), m, n, k)));
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                send(*a, g.zip_map(val(*b), |x, y| x * y));
                send(*b, g.zip_map(val(*a), |x, y| x * y));
            }
            Op::AddRow(a, bias) => {
                send(*a, g.clone());
                let n = g.cols();
                let mut db = vec![T::zero(); n];
                for r in gd.chunks(n.max(1)) {
                    for (d, &x) in db.iter_mut().zip(r) {
                        *d += x;
                    }
                }
                send(*bias, Tensor::row_vector(db));
            }
            Op::Affine(a, scale) => send(*a, g.map(|x| x * *scale)),
            Op::Relu(a) => send(
                *a,
                g.zip_map(val(*a), |x, y| if y > T::zero() { x } else { T::zero() }),
            ),
            Op::Sigmoid(a) => send(*a, g.zip_map(&node.value, |x, y| x * y * (T::one() - y))),
            Op::Tanh(a) => send(*a, g.zip_map(&node.value, |x, y| x * (T::one() - y * y))),
            Op::Cos(a) => send(*a, g.zip_map(val(*a), |x, y| -x * y.sin())),
            Op::ConcatCols(parts) => {
                let m = g.rows();
                let total = g.cols();
                let mut off = 0;
                for &p in parts {
                    let w = val(p).cols();
                    if self.rg(p) {
                        let mut d = Vec::with_capacity(m * w);
                        for r in 0..m {
                            d.extend_from_slice(&gd[r * total + off..r * total + off + w]);
                        }
                        send(p, Tensor::matrix(m, w, d));
                    }
                    off += w;
                }
            }
            Op::GatherRows(a, idx) => {
                let av = val(*a);
                let n = av.cols();
                let mut d = vec![T::zero(); av.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for (x, &y) in d[i * n..(i + 1) * n]
                        .iter_mut()
                        .zip(&gd[r * n..(r + 1) * n])
                    {
                        *x += y;
                    }
                }
                send(*a, Tensor::matrix(av.rows(), n, d));
            }
            Op::ScatterRows(base, idx, rows) => {
                let n = g.cols();
                if self.rg(*base) {
                    let mut d = g.clone();
                    for &i in idx.iter() {
                        d.data_mut()[i * n..(i + 1) * n]
                            .iter_mut()
                            .for_each(|x| *x = T::zero());
                    }
                    send(*base, d);
                }
                if self.rg(*rows) {
                    let mut d = Vec::with_capacity(idx.len() * n);
                    for &i in idx.iter() {
                        d.extend_from_slice(&gd[i * n..(i + 1) * n]);
                    }
                    send(*rows, Tensor::matrix(idx.len(), n, d));
                }
            }
            Op::HeadDot(a, b, heads, scale) => {
                let (av, bv) = (val(*a), val(*b));
                let (e, d) = (av.rows(), av.cols());
                let dh = d / heads;
                let mut da = vec![T::zero(); e * d];
                let mut db = vec![T::zero(); e * d];
                for r in 0..e {
                    for c in 0..d {
                        let gg = gd[r * heads + c / dh] * *scale;
                        da[r * d + c] = gg * bv.data()[r * d + c];
                        db[r * d + c] = gg * av.data()[r * d + c];
                    }
                }
                send(*a, Tensor::matrix(e, d, da));
                send(*b, Tensor::matrix(e, d, db));
            }
            Op::SegmentSoftmax(x, offsets) => {
                let y = node.value.data();
                let h = node.value.cols();
                let mut dx = vec![T::zero(); y.len()];
                for w in offsets.windows(2) {
                    for c in 0..h {
                        let dot =
                            (w[0]..w[1]).fold(T::zero(), |s, r| s + gd[r * h + c] * y[r * h + c]);
                        for r in w[0]..w[1] {
                            dx[r * h + c] = y[r * h + c] * (gd[r * h + c] - dot);
                        }
                    }
                }
                send(*x, Tensor::matrix(node.value.rows(), h, dx));
            }
            Op::SegmentWeightedSum(alpha, v, offsets) => {
                let (al, vv) = (val(*alpha), val(*v));
                let heads = al.cols();
                let d = vv.cols();
                let dh = d / heads;
                let mut dal = vec![T::zero(); al.len()];
                let mut dv = vec![T::zero(); vv.len()];
                for (seg, w) in offsets.windows(2).enumerate() {
                    let go = &gd[seg * d..(seg + 1) * d];
                    for r in w[0]..w[1] {
                        for (c, &gc) in go.iter().enumerate() {
                            let h = c / dh;
                            dal[r * heads + h] += gc * vv.data()[r * d + c];
                            dv[r * d + c] = al.data()[r * heads + h] * gc;
                        }
                    }
                }
                send(*alpha, Tensor::matrix(al.rows(), heads, dal));
                send(*v, Tensor::matrix(vv.rows(), d, dv));
            }
            Op::ColSum(a) => {
                let av = val(*a);
                let n = av.cols();
                let mut d = Vec::with_capacity(av.len());
                for _ in 0..av.rows() {
                    d.extend_from_slice(gd);
                }
                send(*a, Tensor::matrix(av.rows(), n, d));
            }
            Op::Mean(a) => {
                let av = val(*a);
                let s = gd[0] / T::of(av.len() as f64);
                send(*a, Tensor::full(av.shape(), s));
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of `v`; `None` if nothing flowed into it.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

/// Parameters placed on a tape as leaves, in parameter-set order.
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn bind<T: Scalar>(tape: &mut Tape<T>, params: &ParameterSet<T>) -> Self {
        let vars = params.iter().map(|p| tape.leaf(p.value.clone())).collect();
        Self { vars }
    }

    /// Like [`Bound::bind`] but as constants (no gradients).
    pub fn bind_frozen<T: Scalar>(tape: &mut Tape<T>, params: &ParameterSet<T>) -> Self {
        let vars = params
            .iter()
            .map(|p| tape.constant(p.value.clone()))
            .collect();
        Self { vars }
    }

    pub fn var(&self, id: super::ParamId) -> Var {
        self.vars[id.index()]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::matrix(rows, cols, v.to_vec())
    }

    #[test]
    fn product_rule() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(1, 1, &[3.0]));
        let y = tape.mul(x, x);
        let g = tape.backward(y).unwrap();
        assert_eq!(tape.value(y).data(), &[9.0]);
        assert_eq!(g.get(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(1, 2, &[1.0, 2.0]));
        let c = tape.constant(t(1, 2, &[5.0, 7.0]));
        let y = tape.mul(x, c);
        let s = tape.mean(y);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.5, 3.5]);
        assert!(g.get(c).is_none());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(
            5,
            2,
            &[1.0, -3.0, 0.5, 2.0, 700.0, 0.0, -1.0, 1.0, 3.0, 3.0],
        ));
        let y = tape.segment_softmax(x, vec![0, 2, 2, 5]);
        let v = tape.value(y);
        for c in 0..2 {
            assert!(((v.get(0, c) + v.get(1, c)) - 1.0).abs() < 1e-12);
            assert!(((v.get(2, c) + v.get(3, c) + v.get(4, c)) - 1.0).abs() < 1e-12);
        }
        tape.check_finite().unwrap();
    }

    #[test]
    fn nonfinite_is_reported() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(1, 1, &[f64::MAX]));
        let y = tape.affine(x, 10.0, 0.0);
        assert!(tape.check_finite().is_err());
        assert!(tape.backward(y).unwrap_err().is_numeric());
    }

    #[test]
    fn scatter_replaces_rows() {
        let mut tape = Tape::new();
        let base = tape.leaf(t(3, 1, &[1.0, 2.0, 3.0]));
        let rows = tape.leaf(t(1, 1, &[9.0]));
        let out = tape.scatter_rows(base, vec![1], rows);
        assert_eq!(tape.value(out).data(), &[1.0, 9.0, 3.0]);
        let s = tape.mean(out);
        let g = tape.backward(s).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(g.get(base).unwrap().data(), &[third, 0.0, third]);
        assert_eq!(g.get(rows).unwrap().data(), &[third]);
    }
}
