//! Central-difference gradient checks.
//!
//! Error per coordinate is `|analytic - numeric| / max(1, |analytic|)`; the
//! functions return the maximum. Keep ReLU inputs away from the kink.

use crate::error::Result;
use crate::params::ParamStore;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

fn scalar(tape: &Tape, v: Var) -> f64 {
    tape.value(v).data()[0]
}

/// Checks the gradient of scalar `f` with respect to its input at `point`.
pub fn grad_check<F>(f: F, point: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let eval = |p: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(p)?;
        let y = f(&mut tape, x)?;
        Ok(scalar(&tape, y))
    };
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone())?;
    let y = f(&mut tape, x)?;
    let grads = tape.backward(y)?;
    let analytic = grads.wrt(x).cloned().unwrap_or_else(|| Tensor::zeros(point.shape()));

    let mut worst: f64 = 0.0;
    for i in 0..point.len() {
        let mut up = point.clone();
        up.data_mut()[i] += eps;
        let mut down = point.clone();
        down.data_mut()[i] -= eps;
        let numeric = (eval(up)? - eval(down)?) / (2.0 * eps);
        worst = worst.max(rel_err(analytic.data()[i], numeric));
    }
    Ok(worst)
}

/// Checks the gradient of scalar `f` with respect to every parameter in `store`.
pub fn grad_check_params<F>(store: &mut ParamStore, f: F, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let y = f(&mut tape, s)?;
        Ok(scalar(&tape, y))
    };
    let mut tape = Tape::new();
    let y = f(&mut tape, store)?;
    let analytic = tape.backward(y)?.for_params(store);

    let mut worst: f64 = 0.0;
    let ids: Vec<_> = store.ids().collect();
    for (id, g) in ids.into_iter().zip(&analytic) {
        for i in 0..g.len() {
            let orig = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = orig + eps;
            let fp = eval(store)?;
            store.get_mut(id).data_mut()[i] = orig - eps;
            let fm = eval(store)?;
            store.get_mut(id).data_mut()[i] = orig;
            worst = worst.max(rel_err(g.data()[i], (fp - fm) / (2.0 * eps)));
        }
    }
    Ok(worst)
}
