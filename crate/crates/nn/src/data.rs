use optlab_core::market_data::{FeatureRow, SequenceBatch, N_FEATURES};
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Inputs `[n, features]` or `[n, timesteps, features]` with one target per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Tensor,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Tensor, y: Vec<f64>) -> Result<Self> {
        if x.shape().first() != Some(&y.len()) {
            return Err(NnError::Shape { op: "dataset", lhs: x.shape().to_vec(), rhs: vec![y.len()] });
        }
        Ok(Self { x, y })
    }

    pub fn from_rows(rows: &[FeatureRow]) -> Self {
        let x = rows.iter().flat_map(|r| r.features()).collect();
        Self {
            x: Tensor::new(vec![rows.len(), N_FEATURES], x).expect("row features"),
            y: rows.iter().map(|r| r.target).collect(),
        }
    }

    pub fn from_sequences(batch: &SequenceBatch) -> Self {
        let w = &batch.windows;
        Self {
            x: Tensor::new(vec![w.samples, w.timesteps, w.features], w.data.clone()).expect("window shape"),
            y: batch.targets.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn batch(&self, start: usize, end: usize) -> Result<(Tensor, Vec<f64>)> {
        Ok((self.x.rows(start, end)?, self.y[start..end].to_vec()))
    }

    pub fn gather(&self, idx: &[usize]) -> (Tensor, Vec<f64>) {
        (self.x.gather_rows(idx), idx.iter().map(|&i| self.y[i]).collect())
    }

    /// Variance of the targets: the MSE of always predicting their mean.
    pub fn target_variance(&self) -> f64 {
        let n = self.y.len() as f64;
        let mean = self.y.iter().sum::<f64>() / n;
        self.y.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n
    }
}

/// Per-feature z-scoring over the last axis, fitted on training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Tensor) -> Self {
        let f = *x.shape().last().unwrap_or(&1);
        let n = (x.len() / f.max(1)) as f64;
        let mut mean = vec![0.0; f];
        for row in x.data().chunks(f) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; f];
        for row in x.data().chunks(f) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        // constant columns pass through centred but unscaled
        let std = var.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn identity(features: usize) -> Self {
        Self { mean: vec![0.0; features], std: vec![1.0; features] }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.mean.len();
        if x.shape().last() != Some(&f) {
            return Err(NnError::Shape { op: "standardize", lhs: x.shape().to_vec(), rhs: vec![f] });
        }
        let mut out = x.clone();
        for row in out.data_mut().chunks_mut(f) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}
