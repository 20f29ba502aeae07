mod attention;
mod conv;
mod dense;
mod kan;
mod recurrent;

pub use attention::{self_attention, Attention};
pub use conv::Conv1d;
pub use dense::Dense;
pub use kan::{poly_eval, poly_stack, Kan, KanFamily, KanInit};
pub use recurrent::{gru_step, lstm_step, Gru, Lstm};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Sigmoid,
    #[serde(alias = "none")]
    Linear,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Self::Tanh => tape.tanh(x),
            Self::Relu => tape.relu(x),
            Self::Sigmoid => tape.sigmoid(x),
            Self::Linear => Ok(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Tanh => "tanh",
            Self::Relu => "relu",
            Self::Sigmoid => "sigmoid",
            Self::Linear => "linear",
        }
    }
}

/// Training mode carries the RNG that draws dropout masks.
pub enum Mode {
    Eval,
    Train(Box<ChaCha8Rng>),
}

impl Mode {
    pub fn dropout(&mut self, tape: &mut Tape, x: Var, rate: f64) -> Result<Var> {
        match self {
            Self::Train(rng) if rate > 0.0 => tape.dropout(x, rate, rng),
            _ => Ok(x),
        }
    }
}

/// Uniform on `+-sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect()).expect("shape")
}
