//! Tape-based reverse-mode differentiation over dense `f64` vectors.
//!
//! Every op appends one record holding its output value. [`Tape::backward`]
//! walks the records in reverse, so a record only ever reads gradients of
//! records created after it. Parameters are read straight from the borrowed
//! [`ParamStore`]; their gradients land in a [`Gradients`] buffer.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{Gradients, ParamId, ParamStore};
use super::NnError;
use crate::math;

/// Handle to a value recorded on a [`Tape`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Row {
        table: ParamId,
        row: usize,
    },
    Affine {
        terms: Vec<(ParamId, Var)>,
        bias: Option<ParamId>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Scale(Var, f64),
    Sum(Var),
    SumAll(Vec<Var>),
    /// `probs` caches the softmax of `logits`.
    SoftmaxXent {
        logits: Var,
        target: Vec<f64>,
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Record {
    value: Vec<f64>,
    op: Op,
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    records: Vec<Record>,
    consumed: bool,
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Tape { store, records: Vec::new(), consumed: false }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.records.push(Record { value, op });
        Var(self.records.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.records[v.0].value
    }

    /// Value of a length-1 record.
    pub fn scalar(&self, v: Var) -> f64 {
        self.records[v.0].value[0]
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.get(id).value.clone();
        self.push(value, Op::Param(id))
    }

    pub fn row(&mut self, table: ParamId, row: usize) -> Result<Var, NnError> {
        let p = self.store.get(table);
        if row >= p.rows {
            return Err(NnError::IndexOutOfRange { index: row, len: p.rows });
        }
        let value = p.row(row).to_vec();
        Ok(self.push(value, Op::Row { table, row }))
    }

    /// `sum_t W_t x_t (+ b)`.
    pub fn affine(&mut self, terms: &[(ParamId, Var)], bias: Option<ParamId>) -> Result<Var, NnError> {
        let rows = match (terms.first(), bias) {
            (Some(&(w, _)), _) => self.store.get(w).rows,
            (None, Some(b)) => self.store.get(b).len(),
            (None, None) => return Err(NnError::Empty),
        };
        let mut out = match bias {
            Some(b) => {
                let bv = &self.store.get(b).value;
                if bv.len() != rows {
                    return Err(NnError::Shape { expected: rows, found: bv.len() });
                }
                bv.clone()
            }
            None => vec![0.0; rows],
        };
        for &(w, x) in terms {
            let p = self.store.get(w);
            let xv = &self.records[x.0].value;
            if p.rows != rows {
                return Err(NnError::Shape { expected: rows, found: p.rows });
            }
            if p.cols != xv.len() {
                return Err(NnError::Shape { expected: p.cols, found: xv.len() });
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o += dot(&p.value[r * p.cols..(r + 1) * p.cols], xv);
            }
        }
        Ok(self.push(out, Op::Affine { terms: terms.to_vec(), bias }))
    }

    fn same_len(&self, a: Var, b: Var) -> Result<usize, NnError> {
        let (la, lb) = (self.records[a.0].value.len(), self.records[b.0].value.len());
        if la != lb {
            return Err(NnError::Shape { expected: la, found: lb });
        }
        Ok(la)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_len(a, b)?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x + y);
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_len(a, b)?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x - y);
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_len(a, b)?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x * y);
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|&x| math::sigmoid(x)).collect();
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).iter().map(|&x| math::tanh(x)).collect();
        self.push(v, Op::Tanh(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut v = Vec::with_capacity(parts.iter().map(|p| self.records[p.0].value.len()).sum());
        for p in parts {
            v.extend_from_slice(&self.records[p.0].value);
        }
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a).iter().map(|&x| x * s).collect();
        self.push(v, Op::Scale(a, s))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(vec![s], Op::Sum(a))
    }

    /// Sum of scalar records.
    pub fn sum_all(&mut self, xs: &[Var]) -> Var {
        let s = xs.iter().map(|x| self.records[x.0].value[0]).sum();
        self.push(vec![s], Op::SumAll(xs.to_vec()))
    }

    /// Cross-entropy `H(target, softmax(logits))`. `target` must be a
    /// probability vector.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: Vec<f64>) -> Result<Var, NnError> {
        let lv = self.value(logits);
        if lv.len() != target.len() {
            return Err(NnError::Shape { expected: lv.len(), found: target.len() });
        }
        let total: f64 = target.iter().sum();
        if (total - 1.0).abs() > 1e-9 || target.iter().any(|&t| !(t >= 0.0)) {
            return Err(NnError::TargetNotNormalized(total));
        }
        let lse = math::log_sum_exp(lv);
        let loss = target.iter().zip(lv).filter(|(&t, _)| t > 0.0).map(|(&t, &l)| t * (lse - l)).sum();
        let probs = math::softmax(lv);
        Ok(self.push(vec![loss], Op::SoftmaxXent { logits, target, probs }))
    }

    /// Cross-entropy against a one-hot target at `class`.
    pub fn cross_entropy_index(&mut self, logits: Var, class: usize) -> Result<Var, NnError> {
        let n = self.value(logits).len();
        if class >= n {
            return Err(NnError::IndexOutOfRange { index: class, len: n });
        }
        let mut t = vec![0.0; n];
        t[class] = 1.0;
        self.softmax_cross_entropy(logits, t)
    }

    /// Reverse pass from the scalar record `loss`. A tape can be
    /// back-propagated once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NnError> {
        if self.consumed {
            return Err(NnError::AlreadyBackpropagated);
        }
        if self.records[loss.0].value.len() != 1 {
            return Err(NnError::NotScalar(self.records[loss.0].value.len()));
        }
        self.consumed = true;
        let mut pg = Gradients::zeros_like(self.store);
        let mut g: Vec<Vec<f64>> = vec![Vec::new(); loss.0 + 1];
        g[loss.0] = vec![1.0];
        for i in (0..=loss.0).rev() {
            let gi = core::mem::take(&mut g[i]);
            if gi.is_empty() {
                continue;
            }
            let rec = &self.records[i];
            match &rec.op {
                Op::Constant => {}
                Op::Param(id) => axpy(pg.get_mut(*id), 1.0, &gi),
                Op::Row { table, row } => {
                    let cols = self.store.get(*table).cols;
                    axpy(&mut pg.get_mut(*table)[row * cols..(row + 1) * cols], 1.0, &gi);
                }
                Op::Affine { terms, bias } => {
                    if let Some(b) = bias {
                        axpy(pg.get_mut(*b), 1.0, &gi);
                    }
                    for &(w, x) in terms {
                        let p = self.store.get(w);
                        let xv = &self.records[x.0].value;
                        let gw = pg.get_mut(w);
                        for (r, &gr) in gi.iter().enumerate() {
                            if gr != 0.0 {
                                axpy(&mut gw[r * p.cols..(r + 1) * p.cols], gr, xv);
                            }
                        }
                        let gx = acc(&mut g, x, p.cols);
                        for (r, &gr) in gi.iter().enumerate() {
                            if gr != 0.0 {
                                axpy(gx, gr, &p.value[r * p.cols..(r + 1) * p.cols]);
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    axpy(acc(&mut g, *a, gi.len()), 1.0, &gi);
                    axpy(acc(&mut g, *b, gi.len()), 1.0, &gi);
                }
                Op::Sub(a, b) => {
                    axpy(acc(&mut g, *a, gi.len()), 1.0, &gi);
                    axpy(acc(&mut g, *b, gi.len()), -1.0, &gi);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.records[a.0].value, &self.records[b.0].value);
                    let ga = acc(&mut g, *a, gi.len());
                    for ((o, &gv), &y) in ga.iter_mut().zip(&gi).zip(bv) {
                        *o += gv * y;
                    }
                    let gb = acc(&mut g, *b, gi.len());
                    for ((o, &gv), &x) in gb.iter_mut().zip(&gi).zip(av) {
                        *o += gv * x;
                    }
                }
                Op::Sigmoid(a) => {
                    let ga = acc(&mut g, *a, gi.len());
                    for ((o, &gv), &s) in ga.iter_mut().zip(&gi).zip(&rec.value) {
                        *o += gv * s * (1.0 - s);
                    }
                }
                Op::Tanh(a) => {
                    let ga = acc(&mut g, *a, gi.len());
                    for ((o, &gv), &t) in ga.iter_mut().zip(&gi).zip(&rec.value) {
                        *o += gv * (1.0 - t * t);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.records[p.0].value.len();
                        axpy(acc(&mut g, p, n), 1.0, &gi[off..off + n]);
                        off += n;
                    }
                }
                Op::Scale(a, s) => axpy(acc(&mut g, *a, gi.len()), *s, &gi),
                Op::Sum(a) => {
                    let n = self.records[a.0].value.len();
                    for o in acc(&mut g, *a, n).iter_mut() {
                        *o += gi[0];
                    }
                }
                Op::SumAll(xs) => {
                    for &x in xs {
                        acc(&mut g, x, 1)[0] += gi[0];
                    }
                }
                Op::SoftmaxXent { logits, target, probs } => {
                    let t_sum: f64 = target.iter().sum();
                    let gl = acc(&mut g, *logits, probs.len());
                    for ((o, &p), &t) in gl.iter_mut().zip(probs).zip(target) {
                        *o += gi[0] * (p * t_sum - t);
                    }
                }
            }
        }
        Ok(pg)
    }
}

fn acc(g: &mut [Vec<f64>], v: Var, len: usize) -> &mut [f64] {
    let slot = &mut g[v.0];
    if slot.is_empty() {
        *slot = vec![0.0; len];
    }
    slot
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}
