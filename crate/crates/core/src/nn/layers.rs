use std::sync::Arc;

use rand::Rng;

use super::{Bound, Init, ParamId, ParameterSet, Scalar, Tape, Var};
use crate::error::{Error, Result};

fn check_cols<T: Scalar>(tape: &Tape<T>, x: Var, want: usize, op: &'static str) -> Result<()> {
    let got = tape.value(x).cols();
    if got != want {
        return Err(Error::shape(
            op,
            format!("input width {got}, expected {want}"),
        ));
    }
    Ok(())
}

/// `x · W (+ b)` with `W` stored `in × out`.
#[derive(Debug, Clone)]
pub struct Linear {
    w: ParamId,
    b: Option<ParamId>,
    in_dim: usize,
    out_dim: usize,
}

impl Linear {
    pub fn new<T: Scalar, R: Rng>(
        params: &mut ParameterSet<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let w = params.add(&format!("{name}.w"), in_dim, out_dim, Init::Glorot, rng)?;
        let b = if bias {
            Some(params.add(&format!("{name}.b"), 1, out_dim, Init::Zeros, rng)?)
        } else {
            None
        };
        Ok(Self {
            w,
            b,
            in_dim,
            out_dim,
        })
    }

    pub fn weight(&self) -> ParamId {
        self.w
    }

    pub fn bias(&self) -> Option<ParamId> {
        self.b
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<Var> {
        check_cols(tape, x, self.in_dim, "linear")?;
        let y = tape.matmul(x, bound.var(self.w));
        Ok(match self.b {
            Some(b) => tape.add_row(y, bound.var(b)),
            None => y,
        })
    }
}

/// Affine, ReLU, affine.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

impl Mlp {
    pub fn new<T: Scalar, R: Rng>(
        params: &mut ParameterSet<T>,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            hidden: Linear::new(params, &format!("{name}.l1"), in_dim, hidden, true, rng)?,
            output: Linear::new(params, &format!("{name}.l2"), hidden, out_dim, true, rng)?,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.output.out_dim()
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, x: Var) -> Result<Var> {
        let h = self.hidden.forward(tape, bound, x)?;
        let h = tape.relu(h);
        self.output.forward(tape, bound, h)
    }
}

/// Gated recurrent unit over row-stacked inputs.
#[derive(Debug, Clone)]
pub struct GruCell {
    w: [ParamId; 3],
    u: [ParamId; 3],
    b: [ParamId; 3],
    input_dim: usize,
    hidden_dim: usize,
}

impl GruCell {
    pub fn new<T: Scalar, R: Rng>(
        params: &mut ParameterSet<T>,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut w = Vec::new();
        let mut u = Vec::new();
        let mut b = Vec::new();
        for gate in ["z", "r", "h"] {
            w.push(params.add(
                &format!("{name}.w_{gate}"),
                input_dim,
                hidden_dim,
                Init::Glorot,
                rng,
            )?);
            u.push(params.add(
                &format!("{name}.u_{gate}"),
                hidden_dim,
                hidden_dim,
                Init::Glorot,
                rng,
            )?);
            b.push(params.add(&format!("{name}.b_{gate}"), 1, hidden_dim, Init::Zeros, rng)?);
        }
        let arr = |v: Vec<ParamId>| [v[0], v[1], v[2]];
        Ok(Self {
            w: arr(w),
            u: arr(u),
            b: arr(b),
            input_dim,
            hidden_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// `(w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h)` parameter ids.
    pub fn param_ids(&self) -> [ParamId; 9] {
        [
            self.w[0], self.u[0], self.b[0], self.w[1], self.u[1], self.b[1], self.w[2], self.u[2],
            self.b[2],
        ]
    }

    /// `s' = (1 − z)∘s + z∘h̃` for each row of `message` and `state`.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        message: Var,
        state: Var,
    ) -> Result<Var> {
        check_cols(tape, message, self.input_dim, "gru_cell message")?;
        check_cols(tape, state, self.hidden_dim, "gru_cell state")?;
        if tape.value(message).rows() != tape.value(state).rows() {
            return Err(Error::shape(
                "gru_cell",
                "message and state row counts differ",
            ));
        }
        let gate = |tape: &mut Tape<T>, i: usize, s: Var| {
            let a = tape.matmul(message, bound.var(self.w[i]));
            let b = tape.matmul(s, bound.var(self.u[i]));
            let sum = tape.add(a, b);
            tape.add_row(sum, bound.var(self.b[i]))
        };
        let z_pre = gate(tape, 0, state);
        let z = tape.sigmoid(z_pre);
        let r_pre = gate(tape, 1, state);
        let r = tape.sigmoid(r_pre);
        let rs = tape.mul(r, state);
        let h_pre = gate(tape, 2, rs);
        let h = tape.tanh(h_pre);
        let delta = tape.sub(h, state);
        let step = tape.mul(z, delta);
        Ok(tape.add(state, step))
    }
}

/// `φ(t) = cos(t·ω + b)`.
#[derive(Debug, Clone)]
pub struct TimeEncoder {
    omega: ParamId,
    bias: ParamId,
    dim: usize,
}

impl TimeEncoder {
    pub fn new<T: Scalar, R: Rng>(
        params: &mut ParameterSet<T>,
        name: &str,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let omega = params.add(
            &format!("{name}.omega"),
            1,
            dim,
            Init::LogSpaced { lo: 1.0, hi: 1.0e3 },
            rng,
        )?;
        let bias = params.add(&format!("{name}.bias"), 1, dim, Init::Zeros, rng)?;
        Ok(Self { omega, bias, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega(&self) -> ParamId {
        self.omega
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }

    /// One encoded row per time.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, times: &[T]) -> Var {
        let t = tape.constant(super::Tensor::matrix(times.len(), 1, times.to_vec()));
        let phase = tape.matmul(t, bound.var(self.omega));
        let phase = tape.add_row(phase, bound.var(self.bias));
        tape.cos(phase)
    }
}

/// Scaled dot-product attention with learned query/key/value projections,
/// `heads` heads, and an output projection.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    w_q: ParamId,
    w_k: ParamId,
    w_v: ParamId,
    w_o: ParamId,
    heads: usize,
    query_dim: usize,
    key_dim: usize,
    inner: usize,
    out_dim: usize,
}

impl MultiHeadAttention {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng>(
        params: &mut ParameterSet<T>,
        name: &str,
        query_dim: usize,
        key_dim: usize,
        inner: usize,
        out_dim: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || !inner.is_multiple_of(heads) {
            return Err(Error::InvalidParam(format!(
                "attention width {inner} not divisible by {heads} heads"
            )));
        }
        Ok(Self {
            w_q: params.add(&format!("{name}.w_q"), query_dim, inner, Init::Glorot, rng)?,
            w_k: params.add(&format!("{name}.w_k"), key_dim, inner, Init::Glorot, rng)?,
            w_v: params.add(&format!("{name}.w_v"), key_dim, inner, Init::Glorot, rng)?,
            w_o: params.add(&format!("{name}.w_o"), inner, out_dim, Init::Glorot, rng)?,
            heads,
            query_dim,
            key_dim,
            inner,
            out_dim,
        })
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `(w_q, w_k, w_v, w_o)`.
    pub fn param_ids(&self) -> [ParamId; 4] {
        [self.w_q, self.w_k, self.w_v, self.w_o]
    }

    /// Query row `s` attends over key/value rows `offsets[s]..offsets[s+1]`.
    /// A query with no keys yields a zero row.
    pub fn forward_segments<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        queries: Var,
        keys: Var,
        values: Var,
        offsets: Arc<[usize]>,
    ) -> Result<Var> {
        check_cols(tape, queries, self.query_dim, "attention query")?;
        check_cols(tape, keys, self.key_dim, "attention keys")?;
        check_cols(tape, values, self.key_dim, "attention values")?;
        let n_q = tape.value(queries).rows();
        let n_k = tape.value(keys).rows();
        if tape.value(values).rows() != n_k {
            return Err(Error::shape("attention", "key and value counts differ"));
        }
        if offsets.len() != n_q + 1
            || offsets[n_q] != n_k
            || offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::shape(
                "attention",
                "segment offsets do not match inputs",
            ));
        }
        let owner: Vec<usize> = offsets
            .windows(2)
            .enumerate()
            .flat_map(|(s, w)| std::iter::repeat_n(s, w[1] - w[0]))
            .collect();

        let q = tape.matmul(queries, bound.var(self.w_q));
        let k = tape.matmul(keys, bound.var(self.w_k));
        let v = tape.matmul(values, bound.var(self.w_v));
        let q_rows = tape.gather_rows(q, owner);
        let scale = T::one() / T::of((self.inner / self.heads) as f64).sqrt();
        let scores = tape.head_dot(q_rows, k, self.heads, scale);
        let alpha = tape.segment_softmax(scores, offsets.clone());
        let ctx = tape.segment_weighted_sum(alpha, v, offsets);
        Ok(tape.matmul(ctx, bound.var(self.w_o)))
    }

    /// Single query (`1 × query_dim`) over a non-empty key set.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        query: Var,
        keys: Var,
        values: Var,
    ) -> Result<Var> {
        let n = tape.value(keys).rows();
        if n == 0 {
            return Err(Error::Empty("attention keys"));
        }
        if tape.value(query).rows() != 1 {
            return Err(Error::shape("attention", "expected a single query row"));
        }
        self.forward_segments(tape, bound, query, keys, values, Arc::from(vec![0, n]))
    }
}
