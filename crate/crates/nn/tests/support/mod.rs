//! Independent oracles shared by the nn tests and the acceptance suite.
#![allow(dead_code)]

use optlab_nn::grad_check::{grad_check, grad_check_params};
use optlab_nn::layers::{
    self_attention, Activation, Attention, Conv1d, Dense, Gru, Kan, KanFamily, KanInit, Lstm, Mode,
};
use optlab_nn::params::ParamStore;
use optlab_nn::{Model, Result, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FAMILIES: [KanFamily; 4] =
    [KanFamily::Chebyshev2, KanFamily::Legendre, KanFamily::Bessel, KanFamily::Laguerre];

/// Eleven evenly spaced points on `[-1, 1]`.
pub fn grid_points() -> Vec<f64> {
    (0..11).map(|i| -1.0 + 0.2 * i as f64).collect()
}

/// Explicit polynomial forms for degrees 0..=5, expanded symbolically offline.
pub fn closed_form(family: KanFamily, n: usize, x: f64) -> f64 {
    let (x2, x3, x4, x5) = (x * x, x.powi(3), x.powi(4), x.powi(5));
    match (family, n) {
        (_, 0) => 1.0,
        (KanFamily::Chebyshev2, 1) => 2.0 * x,
        (KanFamily::Chebyshev2, 2) => 4.0 * x2 - 1.0,
        (KanFamily::Chebyshev2, 3) => 8.0 * x3 - 4.0 * x,
        (KanFamily::Chebyshev2, 4) => 16.0 * x4 - 12.0 * x2 + 1.0,
        (KanFamily::Chebyshev2, 5) => 32.0 * x5 - 32.0 * x3 + 6.0 * x,
        (KanFamily::Legendre, 1) => x,
        (KanFamily::Legendre, 2) => 1.5 * x2 - 0.5,
        (KanFamily::Legendre, 3) => 2.5 * x3 - 1.5 * x,
        (KanFamily::Legendre, 4) => 35.0 / 8.0 * x4 - 15.0 / 4.0 * x2 + 3.0 / 8.0,
        (KanFamily::Legendre, 5) => 63.0 / 8.0 * x5 - 35.0 / 4.0 * x3 + 15.0 / 8.0 * x,
        (KanFamily::Bessel, 1) => x + 1.0,
        (KanFamily::Bessel, 2) => 3.0 * x2 + 3.0 * x + 1.0,
        (KanFamily::Bessel, 3) => 15.0 * x3 + 15.0 * x2 + 6.0 * x + 1.0,
        (KanFamily::Bessel, 4) => 105.0 * x4 + 105.0 * x3 + 45.0 * x2 + 10.0 * x + 1.0,
        (KanFamily::Bessel, 5) => 945.0 * x5 + 945.0 * x4 + 420.0 * x3 + 105.0 * x2 + 15.0 * x + 1.0,
        (KanFamily::Laguerre, 1) => 1.0 - x,
        (KanFamily::Laguerre, 2) => x2 / 2.0 - 2.0 * x + 1.0,
        (KanFamily::Laguerre, 3) => -x3 / 6.0 + 1.5 * x2 - 3.0 * x + 1.0,
        (KanFamily::Laguerre, 4) => x4 / 24.0 - 2.0 * x3 / 3.0 + 3.0 * x2 - 4.0 * x + 1.0,
        (KanFamily::Laguerre, 5) => -x5 / 120.0 + 5.0 * x4 / 24.0 - 5.0 * x3 / 3.0 + 5.0 * x2 - 5.0 * x + 1.0,
        _ => panic!("no closed form for degree {n}"),
    }
}

/// Worst absolute gap between the recurrences and the closed forms.
pub fn poly_max_error() -> f64 {
    let mut worst: f64 = 0.0;
    for f in FAMILIES {
        for x in grid_points() {
            for (n, v) in optlab_nn::layers::poly_eval(f, 5, x).into_iter().enumerate() {
                worst = worst.max((v - closed_form(f, n, x)).abs());
            }
        }
    }
    worst
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// Fills every parameter with uniform noise so biases are not all zero.
pub fn randomize(store: &mut ParamStore, rng: &mut impl Rng, scale: f64) {
    for t in store.tensors_mut() {
        for v in t.data_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `sum_k z[k] * w[k, j] + b[j]` with `w` row-major `[z.len(), b.len()]`.
fn affine(z: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let h = b.len();
    (0..h).map(|j| b[j] + z.iter().enumerate().map(|(k, zk)| zk * w[k * h + j]).sum::<f64>()).collect()
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    let w = *t.shape().last().unwrap();
    t.data().chunks(w).map(<[f64]>::to_vec).collect()
}

/// Loop-nest LSTM step over each batch row.
pub fn lstm_reference(store: &ParamStore, p: &Lstm, x: &Tensor, h: &Tensor, c: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let d = |id| store.get(id).data();
    let (mut ho, mut co) = (Vec::new(), Vec::new());
    for ((xr, hr), cr) in rows(x).into_iter().zip(rows(h)).zip(rows(c)) {
        let z: Vec<f64> = hr.iter().chain(&xr).copied().collect();
        let f = affine(&z, d(p.w_f), d(p.b_f));
        let i = affine(&z, d(p.w_i), d(p.b_i));
        let o = affine(&z, d(p.w_o), d(p.b_o));
        let g = affine(&z, d(p.w_c), d(p.b_c));
        for j in 0..p.hidden {
            let ct = sigmoid(f[j]) * cr[j] + sigmoid(i[j]) * g[j].tanh();
            co.push(ct);
            ho.push(sigmoid(o[j]) * ct.tanh());
        }
    }
    (ho, co)
}

/// Loop-nest GRU step over each batch row.
pub fn gru_reference(store: &ParamStore, p: &Gru, x: &Tensor, h: &Tensor) -> Vec<f64> {
    let d = |id| store.get(id).data();
    let mut out = Vec::new();
    for (xr, hr) in rows(x).into_iter().zip(rows(h)) {
        let z: Vec<f64> = hr.iter().chain(&xr).copied().collect();
        let r: Vec<f64> = affine(&z, d(p.w_r), d(p.b_r)).into_iter().map(sigmoid).collect();
        let u: Vec<f64> = affine(&z, d(p.w_z), d(p.b_z)).into_iter().map(sigmoid).collect();
        let rz: Vec<f64> = r.iter().zip(&hr).map(|(a, b)| a * b).chain(xr.iter().copied()).collect();
        let cand = affine(&rz, d(p.w_h), d(p.b_h));
        for j in 0..p.hidden {
            out.push(u[j] * hr[j] + (1.0 - u[j]) * cand[j].tanh());
        }
    }
    out
}

/// Loop-nest self-attention on `[batch, T, d]`: returns `(concat([O, H]), A)` flattened.
pub fn attention_reference(store: &ParamStore, p: &Attention, h: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let d = p.dim;
    let t = h.shape()[h.ndim() - 2];
    let zero = vec![0.0; d];
    let (mut out, mut weights) = (Vec::new(), Vec::new());
    for block in h.data().chunks(t * d) {
        let proj = |w| -> Vec<Vec<f64>> { block.chunks(d).map(|r| affine(r, store.get(w).data(), &zero)).collect() };
        let (q, k, v) = (proj(p.w_q), proj(p.w_k), proj(p.w_v));
        for i in 0..t {
            let s: Vec<f64> =
                (0..t).map(|j| (0..d).map(|m| q[i][m] * k[j][m]).sum::<f64>() / (d as f64).sqrt()).collect();
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|x| (x - max).exp()).collect();
            let total: f64 = e.iter().sum();
            let a: Vec<f64> = e.iter().map(|x| x / total).collect();
            out.extend((0..d).map(|m| a.iter().zip(&v).map(|(aj, vj)| aj * vj[m]).sum::<f64>()));
            out.extend_from_slice(&block[i * d..(i + 1) * d]);
            weights.extend(a);
        }
    }
    (out, weights)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest deviation of the layer steps from the loop references over `trials` random draws.
pub fn scalar_reference_errors(trials: u64) -> [(&'static str, f64); 3] {
    let (mut el, mut eg, mut ea): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for s in 0..trials {
        let mut r = rng(1000 + s);
        let (batch, input, hidden) = (r.random_range(1..4), r.random_range(1..5), r.random_range(1..5));
        let mut store = ParamStore::new();
        let lstm = Lstm::new(&mut store, "l", input, hidden, &mut r);
        let gru = Gru::new(&mut store, "g", input, hidden, &mut r);
        let att = Attention::new(&mut store, "a", hidden, &mut r);
        randomize(&mut store, &mut r, 1.0);
        let x = random_tensor(&mut r, &[batch, input], 2.0);
        let h = random_tensor(&mut r, &[batch, hidden], 1.0);
        let c = random_tensor(&mut r, &[batch, hidden], 1.0);

        let mut tape = Tape::new();
        let (xv, hv, cv) =
            (tape.leaf(x.clone()).unwrap(), tape.leaf(h.clone()).unwrap(), tape.leaf(c.clone()).unwrap());
        let (ht, ct) = optlab_nn::layers::lstm_step(&mut tape, &store, &lstm, xv, hv, cv).unwrap();
        let (rh, rc) = lstm_reference(&store, &lstm, &x, &h, &c);
        el = el.max(max_abs_diff(tape.value(ht).data(), &rh)).max(max_abs_diff(tape.value(ct).data(), &rc));

        let gt = optlab_nn::layers::gru_step(&mut tape, &store, &gru, xv, hv).unwrap();
        eg = eg.max(max_abs_diff(tape.value(gt).data(), &gru_reference(&store, &gru, &x, &h)));

        let steps = r.random_range(1..6);
        let seq = random_tensor(&mut r, &[batch, steps, hidden], 1.5);
        let sv = tape.leaf(seq.clone()).unwrap();
        let (o, a) = self_attention(&mut tape, &store, &att, sv).unwrap();
        let (ro, ra) = attention_reference(&store, &att, &seq);
        ea = ea.max(max_abs_diff(tape.value(o).data(), &ro)).max(max_abs_diff(tape.value(a).data(), &ra));
    }
    [("lstm_step", el), ("gru_step", eg), ("self_attention", ea)]
}

/// `mean(out * proj)` with a fixed random projection so every output matters.
fn project(tape: &mut Tape, out: Var, seed: u64) -> Result<Var> {
    let shape = tape.value(out).shape().to_vec();
    let proj = tape.constant(random_tensor(&mut rng(seed), &shape, 1.0))?;
    let m = tape.mul(out, proj)?;
    tape.mean(m)
}

pub const GRAD_EPS: f64 = 1e-4;

/// Worst of the input and parameter gradient errors for one layer instance.
fn check_layer<F>(store: &mut ParamStore, input: Tensor, seed: u64, f: F) -> f64
where
    F: Fn(&mut Tape, &ParamStore, Var) -> Result<Var>,
{
    let wrt_input = grad_check(
        |tape, x| {
            let y = f(tape, store, x)?;
            project(tape, y, seed)
        },
        &input,
        GRAD_EPS,
    )
    .unwrap();
    let wrt_params = grad_check_params(
        store,
        |tape, s| {
            let x = tape.constant(input.clone())?;
            let y = f(tape, s, x)?;
            project(tape, y, seed)
        },
        GRAD_EPS,
    )
    .unwrap();
    wrt_input.max(wrt_params)
}

/// Worst gradient error per layer kind over three random shapes each.
pub fn layer_gradient_suite() -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut record = |name: String, errs: Vec<f64>| out.push((name, errs.into_iter().fold(0.0, f64::max)));

    let dense = [(2, 3, 4, Activation::Tanh), (5, 1, 2, Activation::Sigmoid), (3, 6, 1, Activation::Relu)];
    record(
        "dense".into(),
        dense
            .iter()
            .enumerate()
            .map(|(i, &(b, n_in, n_out, act))| {
                let mut r = rng(10 + i as u64);
                let mut store = ParamStore::new();
                let l = Dense::new(&mut store, "d", n_in, n_out, act, 0.0, &mut r);
                randomize(&mut store, &mut r, 1.0);
                let x = random_tensor(&mut r, &[b, n_in], 1.0);
                check_layer(&mut store, x, 20 + i as u64, |t, s, x| l.forward(t, s, x, &mut Mode::Eval))
            })
            .collect(),
    );

    let conv = [(2, 5, 3, 2, 3), (1, 4, 2, 3, 2), (3, 6, 1, 2, 4)];
    record(
        "conv1d".into(),
        conv.iter()
            .enumerate()
            .map(|(i, &(b, time, c, f, k))| {
                let mut r = rng(30 + i as u64);
                let mut store = ParamStore::new();
                let l = Conv1d::new(&mut store, "c", c, f, k, Activation::Tanh, 0.0, &mut r);
                randomize(&mut store, &mut r, 1.0);
                let x = random_tensor(&mut r, &[b, time, c], 1.0);
                check_layer(&mut store, x, 40 + i as u64, |t, s, x| l.forward(t, s, x, &mut Mode::Eval))
            })
            .collect(),
    );

    let rnn = [(2, 3, 2, 3), (1, 4, 3, 2), (3, 2, 1, 4)];
    record(
        "lstm".into(),
        rnn.iter()
            .enumerate()
            .map(|(i, &(b, time, n_in, hidden))| {
                let mut r = rng(50 + i as u64);
                let mut store = ParamStore::new();
                let l = Lstm::new(&mut store, "l", n_in, hidden, &mut r);
                randomize(&mut store, &mut r, 0.8);
                let x = random_tensor(&mut r, &[b, time, n_in], 1.0);
                check_layer(&mut store, x, 60 + i as u64, |t, s, x| l.forward(t, s, x))
            })
            .collect(),
    );
    record(
        "gru".into(),
        rnn.iter()
            .enumerate()
            .map(|(i, &(b, time, n_in, hidden))| {
                let mut r = rng(70 + i as u64);
                let mut store = ParamStore::new();
                let l = Gru::new(&mut store, "g", n_in, hidden, &mut r);
                randomize(&mut store, &mut r, 0.8);
                let x = random_tensor(&mut r, &[b, time, n_in], 1.0);
                check_layer(&mut store, x, 80 + i as u64, |t, s, x| l.forward(t, s, x))
            })
            .collect(),
    );

    let att = [(2, 3, 2), (1, 4, 3), (3, 2, 4)];
    record(
        "attention".into(),
        att.iter()
            .enumerate()
            .map(|(i, &(b, time, d))| {
                let mut r = rng(90 + i as u64);
                let mut store = ParamStore::new();
                let l = Attention::new(&mut store, "a", d, &mut r);
                randomize(&mut store, &mut r, 1.0);
                let x = random_tensor(&mut r, &[b, time, d], 1.0);
                check_layer(&mut store, x, 100 + i as u64, |t, s, x| Ok(self_attention(t, s, &l, x)?.0))
            })
            .collect(),
    );

    let kan = [(2, 3, 2, 2, true), (4, 2, 3, 4, true), (3, 4, 1, 5, false)];
    for (fi, family) in FAMILIES.into_iter().enumerate() {
        record(
            format!("kan_{}", family.name()),
            kan.iter()
                .enumerate()
                .map(|(i, &(b, n_in, n_out, degree, mix))| {
                    let seed = 110 + 10 * fi as u64 + i as u64;
                    let mut r = rng(seed);
                    let mut store = ParamStore::new();
                    let l =
                        Kan::new(&mut store, "k", family, n_in, n_out, degree, mix, KanInit::default(), 0.0, &mut r);
                    randomize(&mut store, &mut r, 0.7);
                    let x = random_tensor(&mut r, &[b, n_in], 1.0);
                    check_layer(&mut store, x, seed + 5, |t, s, x| l.forward(t, s, x, &mut Mode::Eval))
                })
                .collect(),
        );
    }
    out
}

/// Central differences on every parameter of a whole model's MSE loss.
pub fn model_gradient_error(model: &mut Model, x: &Tensor, y: &[f64]) -> f64 {
    let loss = |m: &Model| {
        let mut tape = Tape::new();
        let l = m.loss(&mut tape, x, y, &mut Mode::Eval).unwrap();
        tape.value(l).data()[0]
    };
    let mut tape = Tape::new();
    let l = model.loss(&mut tape, x, y, &mut Mode::Eval).unwrap();
    let analytic = tape.backward(l).unwrap().for_params(model.params());
    let mut worst: f64 = 0.0;
    let ids: Vec<_> = model.params().ids().collect();
    for (id, g) in ids.into_iter().zip(&analytic) {
        for i in 0..g.len() {
            let orig = model.params().get(id).data()[i];
            model.params_mut().get_mut(id).data_mut()[i] = orig + GRAD_EPS;
            let up = loss(model);
            model.params_mut().get_mut(id).data_mut()[i] = orig - GRAD_EPS;
            let down = loss(model);
            model.params_mut().get_mut(id).data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * GRAD_EPS);
            worst = worst.max((g.data()[i] - numeric).abs() / g.data()[i].abs().max(1.0));
        }
    }
    worst
}
