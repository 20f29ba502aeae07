//! The on-disk result of `prepare`: one chronologically ordered features CSV
//! and a manifest locating the train/validation/test blocks inside it.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use optlab_core::market_data::io::read_features;
use optlab_core::market_data::{
    overlapping_batch, reshape_windows_causal, BuildDiagnostics, DataError, DatasetSplit, DropCounts, FeatureRow,
};
use optlab_nn::Dataset;
use serde::{Deserialize, Serialize};

use crate::config::{self, Windowing};
use crate::error::{CliError, Result};

pub const FEATURES_FILE: &str = "features.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: u32 = 1;

/// Half-open row range `[start, end)` of one split within the features file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitBounds {
    pub start: usize,
    pub end: usize,
    pub rows: usize,
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
}

impl SplitBounds {
    fn new(start: usize, rows: &[FeatureRow]) -> Self {
        Self {
            start,
            end: start + rows.len(),
            rows: rows.len(),
            first_date: rows.first().map(|r| r.quote_date),
            last_date: rows.last().map(|r| r.quote_date),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub train: SplitBounds,
    pub validation: SplitBounds,
    pub test: SplitBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickerShare {
    pub rows: usize,
    /// Percentage of all kept rows.
    pub pct_rows: f64,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: u32,
    pub features_file: String,
    /// Quotes read from the input files.
    pub quotes: usize,
    /// Quotes skipped while building features, by reason.
    pub skipped: BuildDiagnostics,
    /// Feature rows removed by the filters, by reason.
    pub dropped: DropCounts,
    pub rows: usize,
    pub splits: Splits,
    pub tickers: BTreeMap<String, TickerShare>,
}

impl Manifest {
    pub fn new(quotes: usize, skipped: BuildDiagnostics, dropped: DropCounts, split: &DatasetSplit) -> Self {
        let parts = [&split.train, &split.validation, &split.test];
        let rows: usize = parts.iter().map(|p| p.len()).sum();
        let mut tickers: BTreeMap<String, TickerShare> = BTreeMap::new();
        for (k, part) in parts.iter().enumerate() {
            for r in part.iter() {
                let t = tickers.entry(r.ticker.clone()).or_insert(TickerShare {
                    rows: 0,
                    pct_rows: 0.0,
                    train: 0,
                    validation: 0,
                    test: 0,
                });
                t.rows += 1;
                *[&mut t.train, &mut t.validation, &mut t.test][k] += 1;
            }
        }
        for t in tickers.values_mut() {
            t.pct_rows = 100.0 * t.rows as f64 / rows as f64;
        }
        let train = SplitBounds::new(0, &split.train);
        let validation = SplitBounds::new(train.end, &split.validation);
        let test = SplitBounds::new(validation.end, &split.test);
        Self {
            schema: MANIFEST_SCHEMA,
            features_file: FEATURES_FILE.into(),
            quotes,
            skipped,
            dropped,
            rows,
            splits: Splits { train, validation, test },
            tickers,
        }
    }
}

/// Reads the manifest and features and cuts the rows back into their splits.
pub fn load(dir: &Path) -> Result<(Manifest, DatasetSplit)> {
    let mpath = dir.join(MANIFEST_FILE);
    let manifest: Manifest = config::load(&mpath)?;
    let mismatch = |message: String| CliError::Format { path: mpath.clone(), message };
    if manifest.schema != MANIFEST_SCHEMA {
        return Err(mismatch(format!("manifest schema {} is not {MANIFEST_SCHEMA}", manifest.schema)));
    }
    let mut rows = read_features(&dir.join(&manifest.features_file))?;
    let s = &manifest.splits;
    if rows.len() != manifest.rows
        || s.train.start != 0
        || s.train.end != s.validation.start
        || s.validation.end != s.test.start
        || s.test.end != rows.len()
    {
        return Err(mismatch(format!("split bounds do not cover the {} feature rows", rows.len())));
    }
    let test = rows.split_off(s.test.start);
    let validation = rows.split_off(s.validation.start);
    Ok((manifest, DatasetSplit { train: rows, validation, test }))
}

/// Row-wise or windowed samples, with the index of the row each target came from.
pub fn dataset(
    rows: &[FeatureRow],
    timesteps: Option<usize>,
    windowing: Windowing,
) -> std::result::Result<(Dataset, Vec<usize>), DataError> {
    let Some(t) = timesteps else {
        return Ok((Dataset::from_rows(rows), (0..rows.len()).collect()));
    };
    let data: Vec<Vec<f64>> = rows.iter().map(|r| r.features().to_vec()).collect();
    let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let batch = match windowing {
        Windowing::Causal => reshape_windows_causal(&data, &targets, t)?,
        Windowing::Overlapping => overlapping_batch(&data, &targets, t)?,
    };
    Ok((Dataset::from_sequences(&batch), batch.target_rows))
}
