//! Polynomial Kolmogorov-Arnold layers.
//!
//! The input is squashed to `[-1, 1]` with `tanh` (after an optional square
//! linear mix), expanded into the family's polynomials `P_0 .. P_D`, and
//! contracted against `coeffs[in, out, D + 1]`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{glorot_uniform, Mode};
use crate::error::{NnError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KanFamily {
    /// Chebyshev polynomials of the second kind.
    Chebyshev2,
    Legendre,
    /// Bessel polynomials `y_n`.
    Bessel,
    Laguerre,
}

impl KanFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Chebyshev2 => "chebyshev2",
            Self::Legendre => "legendre",
            Self::Bessel => "bessel",
            Self::Laguerre => "laguerre",
        }
    }
}

/// Standard deviation of the normal coefficient init.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KanInit {
    /// `1 / (in * (degree + 1))`
    #[default]
    InDegreePlusOne,
    /// `1 / (in * degree)`; falls back to `degree + 1` at degree 0.
    InDegree,
}

impl KanInit {
    pub fn std(self, in_dim: usize, degree: usize) -> f64 {
        let d = match self {
            Self::InDegree if degree > 0 => degree,
            _ => degree + 1,
        };
        1.0 / (in_dim * d) as f64
    }
}

/// `P_0(x) .. P_degree(x)` by the family's three-term recurrence.
pub fn poly_eval(family: KanFamily, degree: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(degree + 1);
    p.push(1.0);
    if degree == 0 {
        return p;
    }
    p.push(match family {
        KanFamily::Chebyshev2 => 2.0 * x,
        KanFamily::Legendre => x,
        KanFamily::Bessel => x + 1.0,
        KanFamily::Laguerre => 1.0 - x,
    });
    for n in 1..degree {
        let (cur, prev) = (p[n], p[n - 1]);
        let nf = n as f64;
        p.push(match family {
            KanFamily::Chebyshev2 => 2.0 * x * cur - prev,
            KanFamily::Legendre => ((2.0 * nf + 1.0) * x * cur - nf * prev) / (nf + 1.0),
            KanFamily::Bessel => (2.0 * nf + 1.0) * x * cur + prev,
            KanFamily::Laguerre => ((2.0 * nf + 1.0 - x) * cur - nf * prev) / (nf + 1.0),
        });
    }
    p
}

/// The same recurrences on the tape: `[.., in]` to `[.., in, degree + 1]`.
pub fn poly_stack(tape: &mut Tape, family: KanFamily, degree: usize, x: Var) -> Result<Var> {
    let shape = tape.value(x).shape().to_vec();
    let mut terms = vec![tape.constant(Tensor::full(&shape, 1.0))?];
    if degree > 0 {
        terms.push(match family {
            KanFamily::Chebyshev2 => tape.scale(x, 2.0)?,
            KanFamily::Legendre => x,
            KanFamily::Bessel => tape.add_scalar(x, 1.0)?,
            KanFamily::Laguerre => {
                let neg = tape.scale(x, -1.0)?;
                tape.add_scalar(neg, 1.0)?
            }
        });
    }
    for n in 1..degree {
        let (cur, prev) = (terms[n], terms[n - 1]);
        let nf = n as f64;
        let xc = tape.mul(x, cur)?;
        let next = match family {
            KanFamily::Chebyshev2 => {
                let a = tape.scale(xc, 2.0)?;
                tape.sub(a, prev)?
            }
            KanFamily::Legendre => {
                let a = tape.scale(xc, (2.0 * nf + 1.0) / (nf + 1.0))?;
                let b = tape.scale(prev, nf / (nf + 1.0))?;
                tape.sub(a, b)?
            }
            KanFamily::Bessel => {
                let a = tape.scale(xc, 2.0 * nf + 1.0)?;
                tape.add(a, prev)?
            }
            KanFamily::Laguerre => {
                let a = tape.scale(cur, (2.0 * nf + 1.0) / (nf + 1.0))?;
                let b = tape.scale(xc, 1.0 / (nf + 1.0))?;
                let c = tape.scale(prev, nf / (nf + 1.0))?;
                let ab = tape.sub(a, b)?;
                tape.sub(ab, c)?
            }
        };
        terms.push(next);
    }
    let mut col_shape = shape.clone();
    col_shape.push(1);
    let cols: Vec<Var> = terms.into_iter().map(|t| tape.reshape(t, &col_shape)).collect::<Result<_>>()?;
    if cols.len() == 1 {
        Ok(cols[0])
    } else {
        tape.concat(&cols)
    }
}

#[derive(Debug, Clone)]
pub struct Kan {
    pub family: KanFamily,
    pub degree: usize,
    /// `[in, out, degree + 1]`
    pub coeffs: ParamId,
    /// Square `[in, in]` weights and `[in]` bias applied before `tanh`.
    pub mix: Option<(ParamId, ParamId)>,
    pub dropout: f64,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Kan {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        family: KanFamily,
        in_dim: usize,
        out_dim: usize,
        degree: usize,
        mix: bool,
        init: KanInit,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, init.std(in_dim, degree)).expect("positive std");
        let n = in_dim * out_dim * (degree + 1);
        let coeffs = Tensor::new(vec![in_dim, out_dim, degree + 1], (0..n).map(|_| normal.sample(rng)).collect())
            .expect("coeff shape");
        let coeffs = store.add(format!("{name}.coeffs"), coeffs);
        let mix = mix.then(|| {
            let w = store.add(format!("{name}.mix_weights"), glorot_uniform(&[in_dim, in_dim], in_dim, in_dim, rng));
            let b = store.add(format!("{name}.mix_bias"), Tensor::zeros(&[in_dim]));
            (w, b)
        });
        Self { family, degree, coeffs, mix, dropout, in_dim, out_dim }
    }

    /// `[batch, in]` to `[batch, out]`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, z: Var, mode: &mut Mode) -> Result<Var> {
        let s = tape.value(z).shape().to_vec();
        if s.len() != 2 || s[1] != self.in_dim {
            return Err(NnError::Shape { op: "kan", lhs: s, rhs: vec![self.in_dim, self.out_dim, self.degree + 1] });
        }
        let batch = s[0];
        let pre = match self.mix {
            Some((w, b)) => {
                let w = tape.param(store, w)?;
                let b = tape.param(store, b)?;
                let m = tape.matmul(z, w)?;
                tape.add(m, b)?
            }
            None => z,
        };
        let x = tape.tanh(pre)?;
        let d1 = self.degree + 1;
        let polys = poly_stack(tape, self.family, self.degree, x)?;
        let polys = tape.reshape(polys, &[batch, self.in_dim * d1])?;
        // coeffs[i, o, n] -> rows i * (D + 1) + n, columns o
        let c = tape.param(store, self.coeffs)?;
        let c = tape.transpose(c)?;
        let c = tape.reshape(c, &[self.in_dim * d1, self.out_dim])?;
        let y = tape.matmul(polys, c)?;
        mode.dropout(tape, y, self.dropout)
    }
}
