//! Rolling historical volatility from daily closes.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TRADING_DAYS: usize = 252;

/// Look-back windows (in returns) used for the model's volatility features.
pub const VOL_WINDOWS: [usize; 6] = [20, 30, 40, 50, 65, 90];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VolError {
    #[error("price at index {index} is not positive: {value}")]
    NonPositivePrice { index: usize, value: f64 },
    #[error("need at least {needed} prices, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("window must be at least 2 returns, got {0}")]
    WindowTooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolEstimate {
    pub window_days: usize,
    /// Annualized, decimal per square-root year.
    pub value: f64,
    pub as_of: NaiveDate,
}

/// `ln(p[i+1] / p[i])` for consecutive prices.
pub fn log_returns(prices: &[f64]) -> Result<Vec<f64>, VolError> {
    if let Some((index, &value)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
        return Err(VolError::NonPositivePrice { index, value });
    }
    if prices.len() < 2 {
        return Err(VolError::InsufficientHistory { needed: 2, got: prices.len() });
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Sample standard deviation (n - 1) of the last `window` log returns,
/// scaled by `sqrt(trading_days)`.
pub fn realized_vol(prices: &[f64], window: usize, trading_days: usize) -> Result<f64, VolError> {
    if window < 2 {
        return Err(VolError::WindowTooSmall(window));
    }
    if prices.len() < window + 1 {
        return Err(VolError::InsufficientHistory { needed: window + 1, got: prices.len() });
    }
    let tail = &prices[prices.len() - window - 1..];
    let returns = log_returns(tail)?;
    Ok(sample_std(&returns) * (trading_days as f64).sqrt())
}

/// Every window's estimate for each date that has enough history for all of
/// them. Each estimate uses closes dated up to and including its own date.
///
/// `series` must be in ascending date order.
pub fn rolling_vols(
    series: &[(NaiveDate, f64)],
    windows: &[usize],
) -> Result<BTreeMap<NaiveDate, Vec<VolEstimate>>, VolError> {
    let prices: Vec<f64> = series.iter().map(|(_, p)| *p).collect();
    let returns = log_returns(&prices).or_else(|e| match e {
        VolError::InsufficientHistory { .. } => Ok(Vec::new()),
        other => Err(other),
    })?;
    if let Some(&w) = windows.iter().find(|w| **w < 2) {
        return Err(VolError::WindowTooSmall(w));
    }
    let longest = windows.iter().copied().max().unwrap_or(0);
    let scale = (TRADING_DAYS as f64).sqrt();

    let mut out = BTreeMap::new();
    // price index i has returns[..i] behind it
    for i in longest..prices.len() {
        let as_of = series[i].0;
        let estimates = windows
            .iter()
            .map(|&w| VolEstimate { window_days: w, value: sample_std(&returns[i - w..i]) * scale, as_of })
            .collect();
        out.insert(as_of, estimates);
    }
    Ok(out)
}
