//! Model specifications and the assembled network.
//!
//! A spec lists hidden layers; a single linear unit is always appended as the
//! output head. Without `timesteps` the model maps `[batch, features]`; with
//! it, `[batch, timesteps, features]`, and the head reads either the last
//! timestep (when the stack contains recurrent layers) or the flattened
//! sequence (convolution-only stacks).

use std::path::Path;

use optlab_core::seed::stream_rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{read_tensors, write_tensors};
use crate::data::Standardizer;
use crate::error::{NnError, Result};
use crate::layers::{self_attention, Activation, Attention, Conv1d, Dense, Gru, Kan, KanFamily, KanInit, Lstm, Mode};
use crate::params::ParamStore;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const INPUT_DIM: usize = 10;
/// Rows per forward pass when predicting.
pub const PREDICT_CHUNK: usize = 1024;

const INIT_STREAM: u64 = 0x1417;

fn default_input_dim() -> usize {
    INPUT_DIM
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        units: usize,
        #[serde(default)]
        activation: Activation,
        #[serde(default)]
        dropout: f64,
    },
    Kan {
        units: usize,
        degree: usize,
        family: KanFamily,
        /// Square linear mix before the `tanh` squashing.
        #[serde(default = "yes")]
        mix: bool,
        #[serde(default)]
        dropout: f64,
    },
    Conv1d {
        filters: usize,
        kernel_size: usize,
        #[serde(default)]
        activation: Activation,
        #[serde(default)]
        dropout: f64,
    },
    Lstm {
        units: usize,
        #[serde(default)]
        attention: bool,
        /// Applied after the cell (and attention, if any).
        #[serde(default)]
        activation: Activation,
        #[serde(default)]
        dropout: f64,
    },
    Gru {
        units: usize,
        #[serde(default)]
        attention: bool,
        #[serde(default)]
        activation: Activation,
        #[serde(default)]
        dropout: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    /// Window length for sequence models; absent for row-wise models.
    #[serde(default)]
    pub timesteps: Option<usize>,
    pub layers: Vec<LayerSpec>,
    /// Exponentiate the head output so predictions stay positive.
    #[serde(default)]
    pub output_exp: bool,
    #[serde(default)]
    pub kan_init: KanInit,
}

impl ModelSpec {
    /// `depth` dense layers of `width` units.
    pub fn mlp(width: usize, depth: usize, activation: Activation) -> Self {
        Self {
            input_dim: INPUT_DIM,
            timesteps: None,
            layers: (0..depth).map(|_| LayerSpec::Dense { units: width, activation, dropout: 0.0 }).collect(),
            output_exp: false,
            kan_init: KanInit::default(),
        }
    }

    /// A linear input layer of `width` followed by one KAN layer per degree.
    pub fn kan(width: usize, family: KanFamily, degrees: &[usize], dropout: f64) -> Self {
        let mut layers = vec![LayerSpec::Dense { units: width, activation: Activation::Linear, dropout: 0.0 }];
        layers.extend(degrees.iter().map(|&degree| LayerSpec::Kan {
            units: width,
            degree,
            family,
            mix: true,
            dropout,
        }));
        Self { input_dim: INPUT_DIM, timesteps: None, layers, output_exp: false, kan_init: KanInit::default() }
    }

    pub fn is_sequence(&self) -> bool {
        self.timesteps.is_some()
    }

    fn has_recurrent(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, LayerSpec::Lstm { .. } | LayerSpec::Gru { .. }))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NnError::Spec(m));
        if self.input_dim == 0 {
            return bad("input_dim must be positive".into());
        }
        if self.timesteps == Some(0) {
            return bad("timesteps must be positive".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            let (width, dropout) = match l {
                LayerSpec::Dense { units, dropout, .. } => (*units, *dropout),
                LayerSpec::Kan { units, dropout, .. } => (*units, *dropout),
                LayerSpec::Conv1d { filters, kernel_size, dropout, .. } => {
                    if *kernel_size == 0 {
                        return bad(format!("layer {i}: kernel_size must be positive"));
                    }
                    (*filters, *dropout)
                }
                LayerSpec::Lstm { units, dropout, .. } | LayerSpec::Gru { units, dropout, .. } => (*units, *dropout),
            };
            if width == 0 {
                return bad(format!("layer {i}: width must be positive"));
            }
            if !(0.0..1.0).contains(&dropout) {
                return bad(format!("layer {i}: dropout {dropout} outside [0, 1)"));
            }
            match (l, self.is_sequence()) {
                (LayerSpec::Kan { .. }, true) => {
                    return bad(format!("layer {i}: KAN layers take row inputs, not sequences"))
                }
                (LayerSpec::Conv1d { .. } | LayerSpec::Lstm { .. } | LayerSpec::Gru { .. }, false) => {
                    return bad(format!("layer {i}: sequence layer needs `timesteps`"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Parameter count from the layer arithmetic alone.
    pub fn param_count(&self) -> usize {
        let mut w = self.input_dim;
        let mut total = 0;
        for l in &self.layers {
            match *l {
                LayerSpec::Dense { units, .. } => {
                    total += w * units + units;
                    w = units;
                }
                LayerSpec::Kan { units, degree, mix, .. } => {
                    total += w * units * (degree + 1) + if mix { w * w + w } else { 0 };
                    w = units;
                }
                LayerSpec::Conv1d { filters, kernel_size, .. } => {
                    total += kernel_size * w * filters + filters;
                    w = filters;
                }
                LayerSpec::Lstm { units, attention, .. } | LayerSpec::Gru { units, attention, .. } => {
                    let gates = if matches!(l, LayerSpec::Lstm { .. }) { 4 } else { 3 };
                    total += gates * ((units + w) * units + units);
                    if attention {
                        total += 3 * units * units;
                    }
                    w = if attention { 2 * units } else { units };
                }
            }
        }
        total + self.head_inputs(w) + 1
    }

    fn head_inputs(&self, width: usize) -> usize {
        match self.timesteps {
            Some(t) if !self.has_recurrent() => t * width,
            _ => width,
        }
    }
}

#[derive(Debug, Clone)]
enum Cell {
    Lstm(Lstm),
    Gru(Gru),
}

#[derive(Debug, Clone)]
enum Block {
    Dense(Dense),
    Kan(Kan),
    Conv(Conv1d),
    Rnn { cell: Cell, attention: Option<Attention>, activation: Activation, dropout: f64 },
}

#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    store: ParamStore,
    blocks: Vec<Block>,
    head: Dense,
    standardizer: Standardizer,
}

impl Model {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = stream_rng(seed, INIT_STREAM);
        let mut store = ParamStore::new();
        let mut blocks = Vec::with_capacity(spec.layers.len());
        let mut w = spec.input_dim;
        for (i, l) in spec.layers.iter().enumerate() {
            let name = format!("layer{i}");
            let block = match *l {
                LayerSpec::Dense { units, activation, dropout } => {
                    let d = Dense::new(&mut store, &format!("{name}.dense"), w, units, activation, dropout, &mut rng);
                    w = units;
                    Block::Dense(d)
                }
                LayerSpec::Kan { units, degree, family, mix, dropout } => {
                    let k = Kan::new(
                        &mut store,
                        &format!("{name}.kan"),
                        family,
                        w,
                        units,
                        degree,
                        mix,
                        spec.kan_init,
                        dropout,
                        &mut rng,
                    );
                    w = units;
                    Block::Kan(k)
                }
                LayerSpec::Conv1d { filters, kernel_size, activation, dropout } => {
                    let c = Conv1d::new(
                        &mut store,
                        &format!("{name}.conv"),
                        w,
                        filters,
                        kernel_size,
                        activation,
                        dropout,
                        &mut rng,
                    );
                    w = filters;
                    Block::Conv(c)
                }
                LayerSpec::Lstm { units, attention, activation, dropout }
                | LayerSpec::Gru { units, attention, activation, dropout } => {
                    let cell = if matches!(l, LayerSpec::Lstm { .. }) {
                        Cell::Lstm(Lstm::new(&mut store, &format!("{name}.lstm"), w, units, &mut rng))
                    } else {
                        Cell::Gru(Gru::new(&mut store, &format!("{name}.gru"), w, units, &mut rng))
                    };
                    let attention =
                        attention.then(|| Attention::new(&mut store, &format!("{name}.attention"), units, &mut rng));
                    w = if attention.is_some() { 2 * units } else { units };
                    Block::Rnn { cell, attention, activation, dropout }
                }
            };
            blocks.push(block);
        }
        let head_in = spec.head_inputs(w);
        let head = Dense::new(&mut store, "head", head_in, 1, Activation::Linear, 0.0, &mut rng);
        let standardizer = Standardizer::identity(spec.input_dim);
        Ok(Self { spec, store, blocks, head, standardizer })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Scalar parameters actually allocated.
    pub fn num_params(&self) -> usize {
        self.store.num_elements()
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn set_standardizer(&mut self, s: Standardizer) -> Result<()> {
        if s.mean.len() != self.spec.input_dim || s.std.len() != self.spec.input_dim {
            return Err(NnError::Shape { op: "standardizer", lhs: vec![s.mean.len()], rhs: vec![self.spec.input_dim] });
        }
        self.standardizer = s;
        Ok(())
    }

    fn expected_input(&self, batch: usize) -> Vec<usize> {
        match self.spec.timesteps {
            Some(t) => vec![batch, t, self.spec.input_dim],
            None => vec![batch, self.spec.input_dim],
        }
    }

    /// Forward pass on already standardized input, returning `[batch, 1]`.
    pub fn forward(&self, tape: &mut Tape, x: Var, mode: &mut Mode) -> Result<Var> {
        let s = tape.value(x).shape().to_vec();
        let batch = s.first().copied().unwrap_or(0);
        if s != self.expected_input(batch) {
            return Err(NnError::Shape { op: "model", lhs: s, rhs: self.expected_input(batch) });
        }
        let store = &self.store;
        let mut h = x;
        for block in &self.blocks {
            h = match block {
                Block::Dense(d) => d.forward(tape, store, h, mode)?,
                Block::Kan(k) => k.forward(tape, store, h, mode)?,
                Block::Conv(c) => c.forward(tape, store, h, mode)?,
                Block::Rnn { cell, attention, activation, dropout } => {
                    let mut seq = match cell {
                        Cell::Lstm(c) => c.forward(tape, store, h)?,
                        Cell::Gru(c) => c.forward(tape, store, h)?,
                    };
                    if let Some(a) = attention {
                        seq = self_attention(tape, store, a, seq)?.0;
                    }
                    let seq = activation.apply(tape, seq)?;
                    mode.dropout(tape, seq, *dropout)?
                }
            };
        }
        if let Some(t) = self.spec.timesteps {
            let w = *tape.value(h).shape().last().unwrap();
            h = if self.spec.has_recurrent() {
                let last = tape.slice(h, 1, t - 1, 1)?;
                tape.reshape(last, &[batch, w])?
            } else {
                tape.reshape(h, &[batch, t * w])?
            };
        }
        let out = self.head.forward(tape, store, h, mode)?;
        if self.spec.output_exp {
            tape.exp(out)
        } else {
            Ok(out)
        }
    }

    /// Standardizes raw inputs, runs the model and returns the MSE loss node.
    pub fn loss(&self, tape: &mut Tape, x: &Tensor, y: &[f64], mode: &mut Mode) -> Result<Var> {
        let xv = tape.constant(self.standardizer.apply(x)?)?;
        let pred = self.forward(tape, xv, mode)?;
        let target = tape.constant(Tensor::new(vec![y.len()], y.to_vec())?)?;
        tape.mse_loss(pred, target)
    }

    fn predict_chunk(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let xv = tape.constant(self.standardizer.apply(x)?)?;
        let out = self.forward(&mut tape, xv, &mut Mode::Eval)?;
        Ok(tape.value(out).data().to_vec())
    }

    fn chunks(&self, x: &Tensor) -> Vec<(usize, usize)> {
        let n = x.shape().first().copied().unwrap_or(0);
        (0..n).step_by(PREDICT_CHUNK).map(|s| (s, (s + PREDICT_CHUNK).min(n))).collect()
    }

    /// Raw (unstandardized) inputs to predictions, one chunk at a time.
    pub fn predict_sequential(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for (s, e) in self.chunks(x) {
            out.extend(self.predict_chunk(&x.rows(s, e)?)?);
        }
        Ok(out)
    }

    /// Same result as [`Model::predict_sequential`]; chunks run on the rayon
    /// pool when the `parallel` feature is enabled.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<f64>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let parts: Vec<Vec<f64>> = self
                .chunks(x)
                .into_par_iter()
                .map(|(s, e)| self.predict_chunk(&x.rows(s, e)?))
                .collect::<Result<_>>()?;
            Ok(parts.concat())
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.predict_sequential(x)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut tensors: Vec<(String, Tensor)> = self.store.iter().map(|(n, t)| (n.to_string(), t.clone())).collect();
        let f = self.spec.input_dim;
        tensors.push(("input.mean".into(), Tensor::new(vec![f], self.standardizer.mean.clone())?));
        tensors.push(("input.std".into(), Tensor::new(vec![f], self.standardizer.std.clone())?));
        write_tensors(path, &tensors)
    }

    /// Builds the spec and fills it from a checkpoint; names and shapes must match exactly.
    pub fn load(spec: ModelSpec, path: &Path) -> Result<Self> {
        let mut model = Self::new(spec, 0)?;
        let tensors = read_tensors(path)?;
        let expected = model.store.len() + 2;
        if tensors.len() != expected {
            return Err(NnError::Checkpoint(format!("{} tensors in file, spec needs {expected}", tensors.len())));
        }
        let mut it = tensors.into_iter();
        for (id, (name, t)) in model.store.ids().collect::<Vec<_>>().into_iter().zip(it.by_ref()) {
            let want = model.store.get(id);
            if name != model.store.name(id) || t.shape() != want.shape() {
                return Err(NnError::Checkpoint(format!(
                    "tensor `{name}` {:?} does not match `{}` {:?}",
                    t.shape(),
                    model.store.name(id),
                    want.shape()
                )));
            }
            *model.store.get_mut(id) = t;
        }
        let mut next = |want: &str| -> Result<Vec<f64>> {
            match it.next() {
                Some((n, t)) if n == want => Ok(t.into_data()),
                _ => Err(NnError::Checkpoint(format!("missing `{want}`"))),
            }
        };
        let mean = next("input.mean")?;
        let std = next("input.std")?;
        model.set_standardizer(Standardizer { mean, std })?;
        Ok(model)
    }
}
