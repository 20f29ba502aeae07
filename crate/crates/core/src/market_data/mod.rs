//! Option quotes, underlying closes and rates: ingestion, feature
//! construction, filtering, chronological splitting and windowing.

pub mod features;
pub mod io;
pub mod quote;
pub mod split;
pub mod synth;
pub mod windows;

use std::path::PathBuf;

pub use features::{
    build_features, classify_moneyness, drop_reason, filter_rows, BuildDiagnostics, DropCounts, DropReason,
    FeatureBuild, FeatureRow, FilterOutcome, MoneynessBands, MoneynessCategory, RateSeries, UnderlyingSeries,
    DAYS_PER_YEAR, MIN_TTM_DAYS, N_FEATURES,
};
pub use quote::{mid_price, normalize_strike, OptionQuote, QuoteRecord, STRIKE_SCALE};
pub use split::{split_chronological, DatasetSplit, SplitSizes, MIN_SPLIT_ROWS};
pub use synth::{generate_synthetic_dataset, PricingVol, RatePath, SynthConfig, SynthData, TickerSpec};
pub use windows::{overlapping_batch, reshape_windows_causal, reshape_windows_overlapping, SequenceBatch, Windows};

use crate::vol::VolError;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("invalid quote: {0}")]
    InvalidQuote(String),
    #[error("S/K {0} outside the moneyness bands")]
    OutOfBand(f64),
    #[error("{0} rows are too few to split")]
    DegenerateSplit(usize),
    #[error("shape: {0}")]
    Shape(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Vol(#[from] VolError),
    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: u64, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}
