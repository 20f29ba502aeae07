//! Reverse-mode autodiff and the option-pricing model zoo: dense networks,
//! same-padded temporal convolutions, LSTM/GRU stacks with optional
//! self-attention, and polynomial Kolmogorov-Arnold layers. Includes Adam
//! training with early stopping and a reproducible grid search.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod grad_check;
pub mod grid;
pub mod layers;
pub mod model;
pub mod params;
pub mod tape;
pub mod tensor;
pub mod train;

pub use data::{Dataset, Standardizer};
pub use error::{NnError, Result};
pub use model::{LayerSpec, Model, ModelSpec};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
pub use train::{train, Adam, History, TrainConfig};
