//! Error metrics, over/under-pricing classification and sliced reports, all
//! in strike-normalized (C/K) units.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bs::{bs_call_price, BsError, BsInputs};
use crate::market_data::{DataError, FeatureRow, MoneynessBands};
use crate::vol::VOL_WINDOWS;

pub const DEFAULT_MARGIN: f64 = 0.05;
pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("{predictions} predictions for {actuals} actual values")]
    Length { predictions: usize, actuals: usize },
    #[error("actual value {0} is not positive")]
    NonPositiveActual(f64),
    #[error("no realized vol for a {0}-day window")]
    MissingWindow(usize),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Bs(#[from] BsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
}

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<(), EvalError> {
    if pred.len() != actual.len() {
        return Err(EvalError::Length { predictions: pred.len(), actuals: actual.len() });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn error_metrics(pred: &[f64], actual: &[f64]) -> Result<ErrorMetrics, EvalError> {
    check_lengths(pred, actual)?;
    let n = pred.len() as f64;
    let (sq, abs) = pred.iter().zip(actual).fold((0.0, 0.0), |(sq, abs), (p, a)| {
        let e = p - a;
        (sq + e * e, abs + e.abs())
    });
    let mse = sq / n;
    Ok(ErrorMetrics { mse, rmse: mse.sqrt(), mae: abs / n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PricingClass {
    Over,
    Under,
    Correct,
}

/// Both band edges count as correct.
pub fn pricing_class(pred: f64, actual: f64, margin: f64) -> Result<PricingClass, EvalError> {
    if !(actual > 0.0) {
        return Err(EvalError::NonPositiveActual(actual));
    }
    Ok(if pred > actual * (1.0 + margin) {
        PricingClass::Over
    } else if pred < actual * (1.0 - margin) {
        PricingClass::Under
    } else {
        PricingClass::Correct
    })
}

/// Metrics and class shares over one set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n: usize,
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub over: usize,
    pub under: usize,
    pub correct: usize,
    pub pct_over: f64,
    pub pct_under: f64,
    pub pct_correct: f64,
}

pub fn summarize(pred: &[f64], actual: &[f64], margin: f64) -> Result<EvalSummary, EvalError> {
    let m = error_metrics(pred, actual)?;
    let (mut over, mut under, mut correct) = (0, 0, 0);
    for (p, a) in pred.iter().zip(actual) {
        match pricing_class(*p, *a, margin)? {
            PricingClass::Over => over += 1,
            PricingClass::Under => under += 1,
            PricingClass::Correct => correct += 1,
        }
    }
    let n = pred.len();
    let pct = |c: usize| 100.0 * c as f64 / n as f64;
    Ok(EvalSummary {
        n,
        mse: m.mse,
        rmse: m.rmse,
        mae: m.mae,
        over,
        under,
        correct,
        pct_over: pct(over),
        pct_under: pct(under),
        pct_correct: pct(correct),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceBy {
    Ticker,
    Moneyness,
}

/// Per-slice summaries keyed by ticker or by OTM/ATM/ITM label.
pub fn breakdown(
    pred: &[f64],
    rows: &[FeatureRow],
    by: SliceBy,
    margin: f64,
    bands: &MoneynessBands,
) -> Result<BTreeMap<String, EvalSummary>, EvalError> {
    if pred.len() != rows.len() {
        return Err(EvalError::Length { predictions: pred.len(), actuals: rows.len() });
    }
    let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (p, r) in pred.iter().zip(rows) {
        let key = match by {
            SliceBy::Ticker => r.ticker.clone(),
            SliceBy::Moneyness => bands.classify(r.s_over_k)?.label().to_string(),
        };
        let g = groups.entry(key).or_default();
        g.0.push(*p);
        g.1.push(r.target);
    }
    groups.into_iter().map(|(k, (p, a))| Ok((k, summarize(&p, &a, margin)?))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: u32,
    pub model: String,
    pub margin: f64,
    #[serde(flatten)]
    pub overall: EvalSummary,
    pub by_ticker: BTreeMap<String, EvalSummary>,
    pub by_moneyness: BTreeMap<String, EvalSummary>,
}

pub fn evaluate(
    model: &str,
    pred: &[f64],
    rows: &[FeatureRow],
    margin: f64,
    bands: &MoneynessBands,
) -> Result<EvalReport, EvalError> {
    let actual: Vec<f64> = rows.iter().map(|r| r.target).collect();
    Ok(EvalReport {
        schema: REPORT_SCHEMA,
        model: model.to_string(),
        margin,
        overall: summarize(pred, &actual, margin)?,
        by_ticker: breakdown(pred, rows, SliceBy::Ticker, margin, bands)?,
        by_moneyness: breakdown(pred, rows, SliceBy::Moneyness, margin, bands)?,
    })
}

/// Closed-form C/K for each row using the realized vol of `vol_window`.
/// Priced as spot `S/K` and strike 1, which equals `C(S, K) / K`.
pub fn bs_baseline(rows: &[FeatureRow], vol_window: usize) -> Result<Vec<f64>, EvalError> {
    if !VOL_WINDOWS.contains(&vol_window) {
        return Err(EvalError::MissingWindow(vol_window));
    }
    let price = |r: &FeatureRow| -> Result<f64, EvalError> {
        let vol = r.sigma_for_window(vol_window).ok_or(EvalError::MissingWindow(vol_window))?;
        Ok(bs_call_price(&BsInputs::new(r.s_over_k, 1.0, r.rate, vol, r.ttm_years)?)?)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        rows.par_iter().map(price).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        rows.iter().map(price).collect()
    }
}

/// Baseline error metrics for every realized-vol window.
pub fn bs_window_table(rows: &[FeatureRow]) -> Result<Vec<(usize, ErrorMetrics)>, EvalError> {
    let actual: Vec<f64> = rows.iter().map(|r| r.target).collect();
    VOL_WINDOWS.iter().map(|&w| Ok((w, error_metrics(&bs_baseline(rows, w)?, &actual)?))).collect()
}

/// Left-aligned first column, right-aligned rest, two spaces between columns.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                s.push_str(&format!("{c:<w$}"));
            } else {
                s.push_str(&format!("{c:>w$}"));
            }
        }
        s.trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (cols.saturating_sub(1))));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub fn window_table_text(table: &[(usize, ErrorMetrics)]) -> String {
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|(w, m)| {
            vec![format!("sigma_{w}"), format!("{:.6e}", m.mse), format!("{:.6e}", m.rmse), format!("{:.6e}", m.mae)]
        })
        .collect();
    text_table(&["window", "mse", "rmse", "mae"], &rows)
}
