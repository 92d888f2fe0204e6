use std::collections::HashMap;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Bound, Gradients, Scalar, Tensor};
use crate::error::{Error, Result};

/// Index of a parameter inside its [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Zeros,
    /// Log-spaced values from `lo` to `hi` across the row.
    LogSpaced {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
    pub init: Init,
}

/// Named parameter tensors with matching gradient slots.
#[derive(Debug, Clone)]
pub struct ParameterSet<T> {
    params: Vec<Param<T>>,
    by_name: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParameterSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParameterSet<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    /// Registers and initializes a `rows × cols` parameter.
    pub fn add<R: Rng>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut R,
    ) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::InvalidParam(format!("duplicate parameter {name}")));
        }
        let data: Vec<T> = match init {
            Init::Zeros => vec![T::zero(); rows * cols],
            Init::Glorot => {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                (0..rows * cols)
                    .map(|_| T::of(rng.gen_range(-a..=a)))
                    .collect()
            }
            Init::LogSpaced { lo, hi } => {
                let n = rows * cols;
                (0..n)
                    .map(|i| {
                        let f = if n > 1 {
                            i as f64 / (n - 1) as f64
                        } else {
                            0.0
                        };
                        T::of(lo * (hi / lo).powf(f))
                    })
                    .collect()
            }
        };
        let value = Tensor::matrix(rows, cols, data);
        let grad = Tensor::zeros(&[rows, cols]);
        self.by_name.insert(name.to_string(), self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            value,
            grad,
            init,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<T>> {
        self.params.iter()
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Param<T>> {
        self.id(name).map(|i| self.get(i))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.id(name).map(|i| &mut self.params[i.0])
    }

    /// Total scalar count.
    pub fn n_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Adds the gradients of the bound leaves into the gradient slots.
    pub fn accumulate(&mut self, bound: &Bound, grads: &Gradients<T>) {
        for (p, &v) in self.params.iter_mut().zip(bound.vars()) {
            if let Some(g) = grads.get(v) {
                p.grad.add_assign(g);
            }
        }
    }

    /// Euclidean norm of all gradients together.
    pub fn grad_norm(&self) -> T {
        self.params
            .iter()
            .flat_map(|p| p.grad.data())
            .fold(T::zero(), |s, &g| s + g * g)
            .sqrt()
    }

    /// Rescales all gradients so their joint norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: T) -> T {
        let norm = self.grad_norm();
        if norm > max_norm {
            let f = max_norm / norm;
            for p in &mut self.params {
                p.grad.data_mut().iter_mut().for_each(|g| *g *= f);
            }
        }
        norm
    }

    pub fn sgd_step(&mut self, lr: T) {
        for p in &mut self.params {
            for (w, &g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                *w -= lr * g;
            }
        }
    }

    /// Copies all values from `other`, which must have the same layout.
    pub fn copy_values_from(&mut self, other: &ParameterSet<T>) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::InvalidParam("parameter layout mismatch".into()));
        }
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(Error::InvalidParam(format!(
                    "parameter {} does not match {}",
                    a.name, b.name
                )));
            }
            a.value = b.value.clone();
        }
        Ok(())
    }

    /// True if every value is bit-identical to `other`'s.
    pub fn bitwise_eq(&self, other: &ParameterSet<T>) -> bool {
        self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| {
                a.name == b.name
                    && a.value.shape() == b.value.shape()
                    && a.value
                        .data()
                        .iter()
                        .zip(b.value.data())
                        .all(|(x, y)| x.f64().to_bits() == y.f64().to_bits())
            })
    }

    /// Binary checkpoint: magic, version, scalar width, then per tensor its
    /// name, shape and little-endian values.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CKPT_MAGIC);
        buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(T::BYTES as u32).to_le_bytes());
        buf.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            buf.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            buf.extend_from_slice(p.name.as_bytes());
            buf.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
            for &d in p.value.shape() {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in p.value.data() {
                x.write_le(&mut buf);
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Loads values by name into an already-laid-out set. Every parameter
    /// must be present with the same shape.
    pub fn read_checkpoint<R: Read>(&mut self, mut r: R) -> Result<()> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor {
            bytes: &bytes,
            pos: 0,
        };
        if cur.take(8)? != CKPT_MAGIC {
            return Err(Error::Format("not a checkpoint".into()));
        }
        let version = cur.u32()?;
        if version != CKPT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let width = cur.u32()? as usize;
        if width != T::BYTES {
            return Err(Error::Format(format!(
                "checkpoint scalar width {width}, expected {}",
                T::BYTES
            )));
        }
        let count = cur.u32()? as usize;
        let mut seen = vec![false; self.params.len()];
        for _ in 0..count {
            let len = cur.u32()? as usize;
            let name = String::from_utf8(cur.take(len)?.to_vec())
                .map_err(|_| Error::Format("parameter name is not utf-8".into()))?;
            let ndim = cur.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| cur.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let raw = cur.take(n * width)?;
            let idx = *self
                .by_name
                .get(&name)
                .ok_or_else(|| Error::Format(format!("unexpected parameter {name}")))?;
            let p = &mut self.params[idx];
            if p.value.shape() != shape.as_slice() {
                return Err(Error::Format(format!(
                    "parameter {name}: shape {shape:?}, expected {:?}",
                    p.value.shape()
                )));
            }
            let data = raw.chunks(width).map(T::read_le).collect();
            p.value = Tensor::from_vec(&shape, data)?;
            seen[idx] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Format(format!(
                "missing parameter {}",
                self.params[i].name
            )));
        }
        Ok(())
    }

    /// `(name, shape)` for every parameter, for manifests.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.value.shape().to_vec()))
            .collect()
    }
}

const CKPT_MAGIC: &[u8; 8] = b"DNIMCKPT";
const CKPT_VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    step: i32,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParameterSet<T>, lr: T) -> Self {
        let zeros = |p: &Param<T>| Tensor::zeros(p.value.shape());
        Self {
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            step: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    pub fn step(&mut self, params: &mut ParameterSet<T>) {
        self.step += 1;
        let bc1 = T::one() - self.beta1.powi(self.step);
        let bc2 = T::one() - self.beta2.powi(self.step);
        for ((p, m), v) in params.params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let g = p.grad.data();
            for (i, w) in p.value.data_mut().iter_mut().enumerate() {
                let mi = &mut m.data_mut()[i];
                *mi = self.beta1 * *mi + (T::one() - self.beta1) * g[i];
                let vi = &mut v.data_mut()[i];
                *vi = self.beta2 * *vi + (T::one() - self.beta2) * g[i] * g[i];
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
