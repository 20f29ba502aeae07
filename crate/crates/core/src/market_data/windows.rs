//! Sliding windows over chronologically ordered feature rows.
//!
//! Two conventions exist side by side. [`reshape_windows_overlapping`] yields
//! `N - t + 1` windows (every full window, target = the window's last row);
//! [`reshape_windows_causal`] yields `N - t` windows whose target is the row
//! right after the window, so no window sees its own target row.

use super::DataError;

/// Dense `[samples x timesteps x features]` array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Windows {
    pub samples: usize,
    pub timesteps: usize,
    pub features: usize,
    pub data: Vec<f64>,
}

impl Windows {
    pub fn window(&self, i: usize) -> &[f64] {
        let len = self.timesteps * self.features;
        &self.data[i * len..(i + 1) * len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub windows: Windows,
    pub targets: Vec<f64>,
    /// Source row index of each target.
    pub target_rows: Vec<usize>,
}

fn width(data: &[Vec<f64>]) -> Result<usize, DataError> {
    let f = data.first().map_or(0, Vec::len);
    if let Some(bad) = data.iter().position(|r| r.len() != f) {
        return Err(DataError::Shape(format!("row {bad} has {} columns, expected {f}", data[bad].len())));
    }
    Ok(f)
}

fn collect(data: &[Vec<f64>], starts: std::ops::Range<usize>, timesteps: usize, features: usize) -> Windows {
    let samples = starts.len();
    let mut out = Vec::with_capacity(samples * timesteps * features);
    for i in starts {
        for row in &data[i..i + timesteps] {
            out.extend_from_slice(row);
        }
    }
    Windows { samples, timesteps, features, data: out }
}

pub fn reshape_windows_overlapping(data: &[Vec<f64>], time_steps: usize) -> Result<Windows, DataError> {
    if time_steps == 0 || data.len() < time_steps {
        return Err(DataError::Shape(format!("{} rows cannot fill a window of {time_steps}", data.len())));
    }
    let f = width(data)?;
    Ok(collect(data, 0..data.len() - time_steps + 1, time_steps, f))
}

pub fn reshape_windows_causal(
    data: &[Vec<f64>],
    targets: &[f64],
    timesteps: usize,
) -> Result<SequenceBatch, DataError> {
    if targets.len() != data.len() {
        return Err(DataError::Shape(format!("{} targets for {} rows", targets.len(), data.len())));
    }
    if timesteps == 0 || data.len() <= timesteps {
        return Err(DataError::Shape(format!("{} rows leave no causal window of {timesteps}", data.len())));
    }
    let f = width(data)?;
    let n = data.len() - timesteps;
    Ok(SequenceBatch {
        windows: collect(data, 0..n, timesteps, f),
        targets: targets[timesteps..].to_vec(),
        target_rows: (timesteps..data.len()).collect(),
    })
}

/// Overlapping windows paired with the target of each window's last row.
pub fn overlapping_batch(data: &[Vec<f64>], targets: &[f64], time_steps: usize) -> Result<SequenceBatch, DataError> {
    if targets.len() != data.len() {
        return Err(DataError::Shape(format!("{} targets for {} rows", targets.len(), data.len())));
    }
    let windows = reshape_windows_overlapping(data, time_steps)?;
    let target_rows: Vec<usize> = (time_steps - 1..data.len()).collect();
    Ok(SequenceBatch { targets: target_rows.iter().map(|&i| targets[i]).collect(), windows, target_rows })
}
