use rand::Rng;

use super::glorot_uniform;
use crate::error::{NnError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Gate weights act on `[h_prev, x_t]`, so each is `[(hidden + input) x hidden]`.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub w_f: ParamId,
    pub w_i: ParamId,
    pub w_o: ParamId,
    pub w_c: ParamId,
    pub b_f: ParamId,
    pub b_i: ParamId,
    pub b_o: ParamId,
    pub b_c: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct Gru {
    pub w_r: ParamId,
    pub w_z: ParamId,
    pub w_h: ParamId,
    pub b_r: ParamId,
    pub b_z: ParamId,
    pub b_h: ParamId,
    pub input: usize,
    pub hidden: usize,
}

fn gate<R: Rng + ?Sized>(
    store: &mut ParamStore,
    name: &str,
    input: usize,
    hidden: usize,
    rng: &mut R,
) -> (ParamId, ParamId) {
    let w =
        store.add(format!("{name}.weights"), glorot_uniform(&[hidden + input, hidden], hidden + input, hidden, rng));
    let b = store.add(format!("{name}.bias"), Tensor::zeros(&[hidden]));
    (w, b)
}

fn affine(tape: &mut Tape, store: &ParamStore, z: Var, w: ParamId, b: ParamId) -> Result<Var> {
    let w = tape.param(store, w)?;
    let b = tape.param(store, b)?;
    let y = tape.matmul(z, w)?;
    tape.add(y, b)
}

fn check(op: &'static str, tape: &Tape, x: Var, h: Var, input: usize, hidden: usize) -> Result<()> {
    let (sx, sh) = (tape.value(x).shape(), tape.value(h).shape());
    if sx.len() != 2 || sh.len() != 2 || sx[1] != input || sh[1] != hidden || sx[0] != sh[0] {
        return Err(NnError::Shape { op, lhs: sx.to_vec(), rhs: sh.to_vec() });
    }
    Ok(())
}

/// Runs `step` over `[batch, time, input]`, returning every hidden state as `[batch, time, hidden]`.
fn unroll(
    tape: &mut Tape,
    x: Var,
    input: usize,
    hidden: usize,
    op: &'static str,
    mut step: impl FnMut(&mut Tape, Var, usize) -> Result<Var>,
) -> Result<Var> {
    let s = tape.value(x).shape().to_vec();
    if s.len() != 3 || s[2] != input {
        return Err(NnError::Shape { op, lhs: s, rhs: vec![input, hidden] });
    }
    let (batch, time) = (s[0], s[1]);
    let mut outputs = Vec::with_capacity(time);
    for t in 0..time {
        let xt = tape.slice(x, 1, t, 1)?;
        let xt = tape.reshape(xt, &[batch, input])?;
        let h = step(tape, xt, batch)?;
        outputs.push(tape.reshape(h, &[batch, hidden, 1])?);
    }
    let stacked = if outputs.len() == 1 { outputs[0] } else { tape.concat(&outputs)? };
    tape.transpose(stacked)
}

/// One LSTM step: returns `(h_t, c_t)`.
pub fn lstm_step(tape: &mut Tape, store: &ParamStore, p: &Lstm, x: Var, h: Var, c: Var) -> Result<(Var, Var)> {
    check("lstm_step", tape, x, h, p.input, p.hidden)?;
    let z = tape.concat(&[h, x])?;
    let f = affine(tape, store, z, p.w_f, p.b_f)?;
    let f = tape.sigmoid(f)?;
    let i = affine(tape, store, z, p.w_i, p.b_i)?;
    let i = tape.sigmoid(i)?;
    let o = affine(tape, store, z, p.w_o, p.b_o)?;
    let o = tape.sigmoid(o)?;
    let cand = affine(tape, store, z, p.w_c, p.b_c)?;
    let cand = tape.tanh(cand)?;
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, cand)?;
    let c_t = tape.add(keep, write)?;
    let tc = tape.tanh(c_t)?;
    let h_t = tape.mul(o, tc)?;
    Ok((h_t, c_t))
}

/// One GRU step: `h_t = z * h_prev + (1 - z) * h_cand`.
pub fn gru_step(tape: &mut Tape, store: &ParamStore, p: &Gru, x: Var, h: Var) -> Result<Var> {
    check("gru_step", tape, x, h, p.input, p.hidden)?;
    let zin = tape.concat(&[h, x])?;
    let r = affine(tape, store, zin, p.w_r, p.b_r)?;
    let r = tape.sigmoid(r)?;
    let z = affine(tape, store, zin, p.w_z, p.b_z)?;
    let z = tape.sigmoid(z)?;
    let rh = tape.mul(r, h)?;
    let cin = tape.concat(&[rh, x])?;
    let cand = affine(tape, store, cin, p.w_h, p.b_h)?;
    let cand = tape.tanh(cand)?;
    let carry = tape.mul(z, h)?;
    let neg = tape.scale(z, -1.0)?;
    let one_minus = tape.add_scalar(neg, 1.0)?;
    let fresh = tape.mul(one_minus, cand)?;
    tape.add(carry, fresh)
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let (w_f, b_f) = gate(store, &format!("{name}.forget"), input, hidden, rng);
        let (w_i, b_i) = gate(store, &format!("{name}.input"), input, hidden, rng);
        let (w_o, b_o) = gate(store, &format!("{name}.output"), input, hidden, rng);
        let (w_c, b_c) = gate(store, &format!("{name}.cell"), input, hidden, rng);
        Self { w_f, w_i, w_o, w_c, b_f, b_i, b_o, b_c, input, hidden }
    }

    /// `[batch, time, input]` to `[batch, time, hidden]`, starting from zero state.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut state: Option<(Var, Var)> = None;
        unroll(tape, x, self.input, self.hidden, "lstm", |tape, xt, batch| {
            let (h, c) = match state {
                Some(s) => s,
                None => {
                    let zero = tape.constant(Tensor::zeros(&[batch, self.hidden]))?;
                    (zero, zero)
                }
            };
            let next = lstm_step(tape, store, self, xt, h, c)?;
            state = Some(next);
            Ok(next.0)
        })
    }
}

impl Gru {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let (w_r, b_r) = gate(store, &format!("{name}.reset"), input, hidden, rng);
        let (w_z, b_z) = gate(store, &format!("{name}.update"), input, hidden, rng);
        let (w_h, b_h) = gate(store, &format!("{name}.candidate"), input, hidden, rng);
        Self { w_r, w_z, w_h, b_r, b_z, b_h, input, hidden }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut state: Option<Var> = None;
        unroll(tape, x, self.input, self.hidden, "gru", |tape, xt, batch| {
            let h = match state {
                Some(h) => h,
                None => tape.constant(Tensor::zeros(&[batch, self.hidden]))?,
            };
            let next = gru_step(tape, store, self, xt, h)?;
            state = Some(next);
            Ok(next)
        })
    }
}
