use rand::Rng;

use super::{glorot_uniform, Activation, Mode};
use crate::error::{NnError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// `activation(x W + b)` over the last axis; leading axes pass through.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weights: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
    pub dropout: f64,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let weights = store.add(format!("{name}.weights"), glorot_uniform(&[in_dim, out_dim], in_dim, out_dim, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_dim]));
        Self { weights, bias, activation, dropout, in_dim, out_dim }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, mode: &mut Mode) -> Result<Var> {
        let s = tape.value(x).shape();
        if s.last() != Some(&self.in_dim) {
            return Err(NnError::Shape { op: "dense", lhs: s.to_vec(), rhs: vec![self.in_dim, self.out_dim] });
        }
        let w = tape.param(store, self.weights)?;
        let b = tape.param(store, self.bias)?;
        let z = tape.matmul(x, w)?;
        let z = tape.add(z, b)?;
        let a = self.activation.apply(tape, z)?;
        mode.dropout(tape, a, self.dropout)
    }
}
