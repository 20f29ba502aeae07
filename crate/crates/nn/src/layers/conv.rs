use rand::Rng;

use super::{glorot_uniform, Activation, Mode};
use crate::error::{NnError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Same-padded temporal convolution (cross-correlation) over `[batch, time, channels]`.
///
/// Padding totals `kernel_size - 1` zeros; for even kernels the extra zero
/// goes on the left.
#[derive(Debug, Clone)]
pub struct Conv1d {
    /// `[kernel_size, in_channels, filters]`
    pub kernels: ParamId,
    pub bias: ParamId,
    pub kernel_size: usize,
    pub in_channels: usize,
    pub filters: usize,
    pub activation: Activation,
    pub dropout: f64,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        filters: usize,
        kernel_size: usize,
        activation: Activation,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let k =
            glorot_uniform(&[kernel_size, in_channels, filters], kernel_size * in_channels, kernel_size * filters, rng);
        let kernels = store.add(format!("{name}.kernels"), k);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[filters]));
        Self { kernels, bias, kernel_size, in_channels, filters, activation, dropout }
    }

    pub fn padding(&self) -> (usize, usize) {
        let total = self.kernel_size - 1;
        (total - total / 2, total / 2)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, mode: &mut Mode) -> Result<Var> {
        let s = tape.value(x).shape().to_vec();
        if s.len() != 3 || s[2] != self.in_channels {
            return Err(NnError::Shape {
                op: "conv1d",
                lhs: s,
                rhs: vec![self.kernel_size, self.in_channels, self.filters],
            });
        }
        let (batch, time, c) = (s[0], s[1], s[2]);
        let (left, right) = self.padding();

        // pad along time: move time last, concat zeros, move it back
        let xt = tape.transpose(x)?;
        let mut parts = Vec::new();
        if left > 0 {
            parts.push(tape.constant(Tensor::zeros(&[batch, c, left]))?);
        }
        parts.push(xt);
        if right > 0 {
            parts.push(tape.constant(Tensor::zeros(&[batch, c, right]))?);
        }
        let padded = if parts.len() == 1 { xt } else { tape.concat(&parts)? };
        let padded = tape.transpose(padded)?;

        // im2col: [batch, time, kernel_size * c] with offset-major columns
        let cols: Vec<Var> = (0..self.kernel_size).map(|j| tape.slice(padded, 1, j, time)).collect::<Result<_>>()?;
        let cols = if cols.len() == 1 { cols[0] } else { tape.concat(&cols)? };

        let k = tape.param(store, self.kernels)?;
        let k = tape.reshape(k, &[self.kernel_size * c, self.filters])?;
        let b = tape.param(store, self.bias)?;
        let z = tape.matmul(cols, k)?;
        let z = tape.add(z, b)?;
        let a = self.activation.apply(tape, z)?;
        mode.dropout(tape, a, self.dropout)
    }
}
