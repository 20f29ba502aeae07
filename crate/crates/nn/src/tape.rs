//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! Every operation appends a node holding its forward value; [`Tape::backward`]
//! walks the nodes once in reverse and accumulates vector-Jacobian products.
//! Binary elementwise ops broadcast when one shape is a suffix of the other.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{NnError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    Exp(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Reshape(Var),
    Slice { src: Var, axis: usize, start: usize },
    Transpose(Var),
    Mean(Var),
    Dropout(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Gradients from one backward pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: HashMap<ParamId, Var>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// One gradient per stored parameter; zeros for parameters the loss never touched.
    pub fn for_params(&self, store: &ParamStore) -> Vec<Tensor> {
        store
            .ids()
            .map(|id| {
                self.params
                    .get(&id)
                    .and_then(|v| self.grads[v.0].clone())
                    .unwrap_or_else(|| Tensor::zeros(store.get(id).shape()))
            })
            .collect()
    }
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> NnError {
    NnError::Shape { op, lhs: a.to_vec(), rhs: b.to_vec() }
}

/// The larger shape if the smaller one is its suffix.
fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let (big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if big[big.len() - small.len()..] == *small {
        Ok(big.to_vec())
    } else {
        Err(shape_err(op, a, b))
    }
}

fn zip_broadcast(a: &Tensor, b: &Tensor, out_shape: &[usize], f: impl Fn(f64, f64) -> f64) -> Tensor {
    let n: usize = out_shape.iter().product();
    let (da, db) = (a.data(), b.data());
    let mut data = Vec::with_capacity(n);
    if da.len() == db.len() {
        data.extend(da.iter().zip(db).map(|(x, y)| f(*x, *y)));
    } else if da.len() > db.len() {
        for chunk in da.chunks(db.len()) {
            data.extend(chunk.iter().zip(db).map(|(x, y)| f(*x, *y)));
        }
    } else {
        for chunk in db.chunks(da.len()) {
            data.extend(da.iter().zip(chunk).map(|(x, y)| f(*x, *y)));
        }
    }
    Tensor::new(out_shape.to_vec(), data).expect("broadcast shape")
}

/// Sums `g` down to `len` elements by folding the leading broadcast axes.
fn reduce_to(g: &[f64], shape: &[usize]) -> Tensor {
    let len: usize = shape.iter().product();
    let mut out = vec![0.0; len];
    for chunk in g.chunks(len) {
        for (o, x) in out.iter_mut().zip(chunk) {
            *o += x;
        }
    }
    Tensor::new(shape.to_vec(), out).expect("reduce shape")
}

/// Below this many multiply-adds a product stays on the calling thread.
#[cfg(feature = "parallel")]
const PAR_WORK: usize = 1 << 16;
/// Output rows per parallel task.
#[cfg(feature = "parallel")]
const ROW_BLOCK: usize = 64;

/// Runs `f(first_row, block)` over blocks of `width`-sized rows of `out`.
/// Splitting by output rows leaves each element's accumulation order
/// unchanged, so both paths agree bit for bit.
fn for_row_blocks(out: &mut [f64], width: usize, work: usize, f: impl Fn(usize, &mut [f64]) + Sync + Send) {
    if out.is_empty() || width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if work >= PAR_WORK {
        use rayon::prelude::*;
        out.par_chunks_mut(width * ROW_BLOCK).enumerate().for_each(|(i, block)| f(i * ROW_BLOCK, block));
        return;
    }
    let _ = work;
    f(0, out);
}

/// `c[m x n] += A B` where `A[i, p] = a[i * rsa + p * csa]` and `B[p, j] = b[p * rsb + j * csb]`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa, "gemm lhs out of bounds");
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb, "gemm rhs out of bounds");
    assert!(c.len() >= m * n, "gemm output out of bounds");
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

// out[m x n] += a[m x k] * b[k x n]
fn mm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for_row_blocks(out, n, m * k * n, |i0, block| {
        let rows = block.len() / n;
        gemm(rows, k, n, &a[i0 * k..], k, 1, b, n, 1, block);
    });
}

// out[m x k] += g[m x n] * b[k x n]^T
fn mm_bt(g: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for_row_blocks(out, k, m * k * n, |i0, block| {
        let rows = block.len() / k;
        gemm(rows, n, k, &g[i0 * n..], n, 1, b, 1, n, block);
    });
}

// out[k x n] += a[m x k]^T * g[m x n]
fn mm_at(a: &[f64], g: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for_row_blocks(out, n, m * k * n, |p0, block| {
        let rows = block.len() / n;
        gemm(rows, m, n, &a[p0..], 1, k, g, n, 1, block);
    });
}

fn transpose_last2(t: &Tensor) -> Tensor {
    let s = t.shape();
    let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
    let mut shape = s.to_vec();
    let nd = shape.len();
    shape.swap(nd - 2, nd - 1);
    let mut out = vec![0.0; t.len()];
    for (src, dst) in t.data().chunks(r * c).zip(out.chunks_mut(r * c)) {
        for i in 0..r {
            for j in 0..c {
                dst[j * r + i] = src[i * c + j];
            }
        }
    }
    Tensor::new(shape, out).expect("transpose shape")
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        if !value.all_finite() {
            return Err(NnError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push("leaf", value, Op::Leaf)
    }

    /// Same as [`Tape::leaf`]; reads better for data that is never differentiated.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value)
    }

    /// The parameter's value on this tape, recorded once per tape.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(v) = self.params.get(&id) {
            return Ok(*v);
        }
        let v = self.push("param", store.get(id).clone(), Op::Leaf)?;
        self.params.insert(id, v);
        Ok(v)
    }

    /// `a [.., m, k] x b [k, n]` with shared weights, or `b [.., k, n]` with
    /// the same leading axes as `a`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() < 2 || sb.len() < 2 {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (k2, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        let shared = sb.len() == 2;
        if k != k2 || (!shared && sa[..sa.len() - 2] != sb[..sb.len() - 2]) {
            return Err(shape_err("matmul", sa, sb));
        }
        let batch: usize = sa[..sa.len() - 2].iter().product();
        let mut shape = sa[..sa.len() - 2].to_vec();
        shape.extend([m, n]);
        let mut out = vec![0.0; batch * m * n];
        let (da, db) = (self.value(a).data(), self.value(b).data());
        for t in 0..batch {
            let bt = if shared { db } else { &db[t * k * n..(t + 1) * k * n] };
            mm(&da[t * m * k..(t + 1) * m * k], bt, &mut out[t * m * n..(t + 1) * m * n], m, k, n);
        }
        self.push("matmul", Tensor::new(shape, out)?, Op::MatMul(a, b))
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape(name, ta.shape(), tb.shape())?;
        let value = zip_broadcast(ta, tb, &shape, f);
        self.push(name, value, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| c * x);
        self.push("scale", v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x + c);
        self.push("add_scalar", v, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::tanh);
        self.push("tanh", v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push("sigmoid", v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push("relu", v, Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::exp);
        self.push("exp", v, Op::Exp(a))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let n = *t.shape().last().ok_or_else(|| shape_err("softmax", t.shape(), &[]))?;
        let mut out = t.data().to_vec();
        for row in out.chunks_mut(n.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        let shape = t.shape().to_vec();
        self.push("softmax", Tensor::new(shape, out)?, Op::Softmax(a))
    }

    /// Concatenation along the last axis; leading axes must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(*parts.first().ok_or_else(|| shape_err("concat", &[], &[]))?).shape().to_vec();
        let lead = &first[..first.len().saturating_sub(1)];
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let s = self.value(*p).shape();
            if s.is_empty() || &s[..s.len() - 1] != lead {
                return Err(shape_err("concat", &first, s));
            }
            widths.push(s[s.len() - 1]);
        }
        let rows: usize = lead.iter().product();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(*p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        self.push("concat", Tensor::new(shape, out)?, Op::Concat(parts.to_vec()))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a);
        if shape.iter().product::<usize>() != t.len() {
            return Err(shape_err("reshape", t.shape(), shape));
        }
        let v = Tensor::new(shape.to_vec(), t.data().to_vec())?;
        self.push("reshape", v, Op::Reshape(a))
    }

    /// Elements `start..start + len` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        let s = t.shape();
        if axis >= s.len() || start + len > s[axis] {
            return Err(shape_err("slice", s, &[axis, start, len]));
        }
        let outer: usize = s[..axis].iter().product();
        let inner: usize = s[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * s[axis] * inner;
            out.extend_from_slice(&t.data()[base + start * inner..base + (start + len) * inner]);
        }
        let mut shape = s.to_vec();
        shape[axis] = len;
        self.push("slice", Tensor::new(shape, out)?, Op::Slice { src: a, axis, start })
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.ndim() < 2 {
            return Err(shape_err("transpose", t.shape(), &[]));
        }
        let v = transpose_last2(t);
        self.push("transpose", v, Op::Transpose(a))
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(shape_err("mean", t.shape(), &[]));
        }
        let v = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push("mean", Tensor::scalar(v), Op::Mean(a))
    }

    /// Multiplies by a fixed mask (entries 0 or `1 / keep`).
    pub fn dropout_apply(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        let t = self.value(a);
        if mask.len() != t.len() {
            return Err(shape_err("dropout", t.shape(), &[mask.len()]));
        }
        let data = t.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
        let v = Tensor::new(t.shape().to_vec(), data)?;
        self.push("dropout", v, Op::Dropout(a, mask))
    }

    /// Inverted dropout: drops with probability `rate`, scales survivors by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, a: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - rate;
        let mask =
            (0..self.value(a).len()).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        self.dropout_apply(a, mask)
    }

    /// Mean squared error between equally sized tensors (shapes may differ).
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.len() != t.len() || p.is_empty() {
            return Err(shape_err("mse_loss", p.shape(), t.shape()));
        }
        let flat = [p.len()];
        let p = self.reshape(pred, &flat)?;
        let t = self.reshape(target, &flat)?;
        let d = self.sub(p, t)?;
        let sq = self.mul(d, d)?;
        self.mean(sq)
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let l = self.value(loss);
        if l.len() != 1 {
            return Err(NnError::NotScalar(l.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(l.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            let mut send = |v: Var, delta: Tensor| match &mut grads[v.0] {
                Some(acc) => {
                    for (a, d) in acc.data_mut().iter_mut().zip(delta.data()) {
                        *a += d;
                    }
                }
                slot @ None => *slot = Some(delta),
            };
            let val = |v: Var| &self.nodes[v.0].value;
            let elementwise = |x: &Tensor, f: &dyn Fn(usize, f64) -> f64| {
                let data = g.data().iter().enumerate().map(|(j, gj)| f(j, *gj)).collect();
                Tensor::new(x.shape().to_vec(), data).expect("same shape")
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (val(*a), val(*b));
                    let (sa, sb) = (ta.shape(), tb.shape());
                    let (m, k, n) = (sa[sa.len() - 2], sa[sa.len() - 1], sb[sb.len() - 1]);
                    let batch = ta.len() / (m * k);
                    let shared = sb.len() == 2;
                    let mut ga = vec![0.0; ta.len()];
                    let mut gb = vec![0.0; tb.len()];
                    for t in 0..batch {
                        let gt = &g.data()[t * m * n..(t + 1) * m * n];
                        let boff = if shared { 0 } else { t * k * n };
                        mm_bt(gt, &tb.data()[boff..boff + k * n], &mut ga[t * m * k..(t + 1) * m * k], m, k, n);
                        mm_at(&ta.data()[t * m * k..(t + 1) * m * k], gt, &mut gb[boff..boff + k * n], m, k, n);
                    }
                    let (sa, sb) = (sa.to_vec(), sb.to_vec());
                    send(*a, Tensor::new(sa, ga)?);
                    send(*b, Tensor::new(sb, gb)?);
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    let (sa, sb) = (val(*a).shape().to_vec(), val(*b).shape().to_vec());
                    send(*a, reduce_to(g.data(), &sa));
                    let gb = reduce_to(g.data(), &sb);
                    send(*b, if sign < 0.0 { gb.map(|x| -x) } else { gb });
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (val(*a), val(*b));
                    let full = zip_broadcast(&g, tb, g.shape(), |x, y| x * y);
                    let ga = reduce_to(full.data(), ta.shape());
                    let full = zip_broadcast(&g, ta, g.shape(), |x, y| x * y);
                    let gb = reduce_to(full.data(), tb.shape());
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::Scale(a, c) => send(*a, g.map(|x| c * x)),
                Op::AddScalar(a) => send(*a, g.clone()),
                Op::Tanh(a) => send(*a, elementwise(y, &|j, gj| gj * (1.0 - y.data()[j] * y.data()[j]))),
                Op::Sigmoid(a) => send(*a, elementwise(y, &|j, gj| gj * y.data()[j] * (1.0 - y.data()[j]))),
                Op::Relu(a) => {
                    let x = val(*a);
                    send(*a, elementwise(x, &|j, gj| if x.data()[j] > 0.0 { gj } else { 0.0 }))
                }
                Op::Exp(a) => send(*a, elementwise(y, &|j, gj| gj * y.data()[j])),
                Op::Softmax(a) => {
                    let n = *y.shape().last().unwrap();
                    let mut out = vec![0.0; y.len()];
                    for ((yr, gr), or) in y.data().chunks(n).zip(g.data().chunks(n)).zip(out.chunks_mut(n)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, yy), gg) in or.iter_mut().zip(yr).zip(gr) {
                            *o = yy * (gg - dot);
                        }
                    }
                    send(*a, Tensor::new(y.shape().to_vec(), out)?);
                }
                Op::Concat(parts) => {
                    let total = *y.shape().last().unwrap();
                    let rows = y.len() / total.max(1);
                    let mut offset = 0;
                    for p in parts {
                        let shape = val(*p).shape().to_vec();
                        let w = *shape.last().unwrap();
                        let mut out = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            out.extend_from_slice(&g.data()[r * total + offset..r * total + offset + w]);
                        }
                        offset += w;
                        send(*p, Tensor::new(shape, out)?);
                    }
                }
                Op::Reshape(a) => send(*a, Tensor::new(val(*a).shape().to_vec(), g.data().to_vec())?),
                Op::Slice { src, axis, start } => {
                    let s = val(*src).shape().to_vec();
                    let len = y.shape()[*axis];
                    let outer: usize = s[..*axis].iter().product();
                    let inner: usize = s[axis + 1..].iter().product();
                    let mut out = vec![0.0; val(*src).len()];
                    for o in 0..outer {
                        let dst = o * s[*axis] * inner + start * inner;
                        let from = o * len * inner;
                        out[dst..dst + len * inner].copy_from_slice(&g.data()[from..from + len * inner]);
                    }
                    send(*src, Tensor::new(s, out)?);
                }
                Op::Transpose(a) => send(*a, transpose_last2(&g)),
                Op::Mean(a) => {
                    let x = val(*a);
                    let gv = g.data()[0] / x.len() as f64;
                    send(*a, Tensor::full(x.shape(), gv));
                }
                Op::Dropout(a, mask) => send(*a, elementwise(y, &|j, gj| gj * mask[j])),
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, params: self.params.clone() })
    }
}
