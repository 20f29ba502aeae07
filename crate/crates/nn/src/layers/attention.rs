use rand::Rng;

use super::glorot_uniform;
use crate::error::{NnError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

/// Single-head scaled dot-product self-attention with square projections.
#[derive(Debug, Clone)]
pub struct Attention {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub dim: usize,
}

impl Attention {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, dim: usize, rng: &mut R) -> Self {
        let mut proj = |n: &str| store.add(format!("{name}.{n}"), glorot_uniform(&[dim, dim], dim, dim, rng));
        let (w_q, w_k, w_v) = (proj("query"), proj("key"), proj("value"));
        Self { w_q, w_k, w_v, dim }
    }
}

/// `concat([softmax(Q K^T / sqrt(d)) V, H])` for `H` of shape `[.., T, d]`.
///
/// Returns the output `[.., T, 2d]` and the attention weights `[.., T, T]`.
pub fn self_attention(tape: &mut Tape, store: &ParamStore, p: &Attention, h: Var) -> Result<(Var, Var)> {
    let s = tape.value(h).shape();
    if s.len() < 2 || s[s.len() - 1] != p.dim {
        return Err(NnError::Shape { op: "self_attention", lhs: s.to_vec(), rhs: vec![p.dim, p.dim] });
    }
    let wq = tape.param(store, p.w_q)?;
    let wk = tape.param(store, p.w_k)?;
    let wv = tape.param(store, p.w_v)?;
    let q = tape.matmul(h, wq)?;
    let k = tape.matmul(h, wk)?;
    let v = tape.matmul(h, wv)?;
    let kt = tape.transpose(k)?;
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, 1.0 / (p.dim as f64).sqrt())?;
    let weights = tape.softmax(scores)?;
    let o = tape.matmul(weights, v)?;
    Ok((tape.concat(&[o, h])?, weights))
}
