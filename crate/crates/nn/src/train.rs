//! Adam with mini-batches in chronological order and early stopping on the
//! validation MSE.

use optlab_core::seed::stream_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{NnError, Result};
use crate::layers::Mode;
use crate::model::Model;
use crate::params::ParamStore;
use crate::tape::Tape;
use crate::tensor::Tensor;

const SHUFFLE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update; `grads` lines up with `store.tensors()`.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != store.len() {
            return Err(NnError::Shape { op: "adam", lhs: vec![grads.len()], rhs: vec![store.len()] });
        }
        if self.m.is_empty() {
            self.m = store.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let (c1, c2) = (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t));
        for (((p, g), m), v) in store.tensors_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if g.shape() != p.shape() {
                return Err(NnError::Shape { op: "adam", lhs: g.shape().to_vec(), rhs: p.shape().to_vec() });
            }
            for (((p, g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

fn default_batch_size() -> usize {
    256
}

fn default_learning_rate() -> f64 {
    1e-3
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Epochs without strict validation improvement before stopping.
    pub patience: Option<usize>,
    #[serde(default = "yes")]
    pub restore_best: bool,
    pub seed: u64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Shuffle batch order each epoch; off keeps chronological order.
    #[serde(default)]
    pub shuffle: bool,
}

impl TrainConfig {
    pub fn new(epochs: usize, seed: u64) -> Self {
        Self {
            epochs,
            batch_size: default_batch_size(),
            patience: None,
            restore_best: true,
            seed,
            learning_rate: default_learning_rate(),
            shuffle: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NnError::Config(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.patience.is_some_and(|p| p == 0 || p > self.epochs) {
            return bad("patience must be in 1..=epochs");
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
    /// 1-based epoch with the lowest validation loss.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.records {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
        }
        s
    }
}

pub fn mse(pred: &[f64], actual: &[f64]) -> f64 {
    pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / actual.len() as f64
}

/// Fits the input standardizer on `train`, then runs Adam for up to
/// `cfg.epochs` epochs. A non-finite loss or gradient aborts with
/// [`NnError::Diverged`].
pub fn train(model: &mut Model, train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(NnError::Config("training and validation sets must be non-empty".into()));
    }
    model.set_standardizer(Standardizer::fit(&train.x))?;
    let mut adam = Adam::new(cfg.learning_rate);
    let n = train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0usize, model.params().clone());
    let mut stopped_early = false;
    let diverged = |epoch| NnError::Diverged { epoch, learning_rate: cfg.learning_rate };

    for epoch in 1..=cfg.epochs {
        let mut mode = Mode::Train(Box::new(stream_rng(cfg.seed, epoch as u64)));
        if cfg.shuffle {
            order.shuffle(&mut stream_rng(cfg.seed, SHUFFLE_STREAM + epoch as u64));
        }
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) =
                if cfg.shuffle { train.gather(chunk) } else { train.batch(chunk[0], chunk[0] + chunk.len())? };
            let step = (|| {
                let mut tape = Tape::new();
                let loss = model.loss(&mut tape, &x, &y, &mut mode)?;
                let value = tape.value(loss).data()[0];
                let grads = tape.backward(loss)?.for_params(model.params());
                Ok::<_, NnError>((value, grads))
            })();
            let (value, grads) = match step {
                Ok(v) => v,
                Err(NnError::NonFinite { .. }) => return Err(diverged(epoch)),
                Err(e) => return Err(e),
            };
            if !value.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(diverged(epoch));
            }
            adam.step(model.params_mut(), &grads)?;
            weighted += value * y.len() as f64;
        }
        let train_loss = weighted / n as f64;
        let val_loss = match model.predict(&val.x) {
            Ok(p) => mse(&p, &val.y),
            Err(NnError::NonFinite { .. }) => return Err(diverged(epoch)),
            Err(e) => return Err(e),
        };
        if !val_loss.is_finite() {
            return Err(diverged(epoch));
        }
        records.push(EpochRecord { epoch, train_loss, val_loss });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.params().clone());
        } else if cfg.patience.is_some_and(|p| epoch - best.1 >= p) {
            stopped_early = true;
            break;
        }
    }
    let (best_val_loss, best_epoch, params) = best;
    if cfg.restore_best {
        *model.params_mut() = params;
    }
    Ok(History { records, best_epoch, best_val_loss, stopped_early })
}
