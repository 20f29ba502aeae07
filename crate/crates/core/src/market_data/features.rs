use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

use super::quote::{OptionQuote, QuoteRecord};
use super::DataError;
use crate::vol::{rolling_vols, VOL_WINDOWS};

/// Calendar days per year used for time to maturity.
pub const DAYS_PER_YEAR: f64 = 365.0;
pub const MIN_TTM_DAYS: f64 = 15.0;
pub const N_FEATURES: usize = 10;

/// Daily closes per ticker, ascending by date.
pub type UnderlyingSeries = BTreeMap<String, Vec<(NaiveDate, f64)>>;
/// Risk-free rate (decimal per annum) by date.
pub type RateSeries = BTreeMap<NaiveDate, f64>;

/// Model inputs and target for one option observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub quote_date: NaiveDate,
    pub ticker: String,
    pub s_over_k: f64,
    pub strike: f64,
    pub ttm_years: f64,
    pub rate: f64,
    /// Realized vol for each of [`VOL_WINDOWS`], in that order.
    pub sigma: [f64; 6],
    /// Mid price over strike.
    pub target: f64,
}

impl FeatureRow {
    /// `[S/K, K, T-t, r, sigma_20 .. sigma_90]`.
    pub fn features(&self) -> [f64; N_FEATURES] {
        let mut f = [0.0; N_FEATURES];
        f[0] = self.s_over_k;
        f[1] = self.strike;
        f[2] = self.ttm_years;
        f[3] = self.rate;
        f[4..].copy_from_slice(&self.sigma);
        f
    }

    pub fn sigma_for_window(&self, window: usize) -> Option<f64> {
        VOL_WINDOWS.iter().position(|w| *w == window).map(|i| self.sigma[i])
    }

    pub fn moneyness(&self, bands: &MoneynessBands) -> Result<MoneynessCategory, DataError> {
        bands.classify(self.s_over_k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MoneynessCategory {
    Otm,
    Atm,
    Itm,
}

impl MoneynessCategory {
    pub fn label(self) -> &'static str {
        match self {
            Self::Otm => "OTM",
            Self::Atm => "ATM",
            Self::Itm => "ITM",
        }
    }
}

/// Band edges on S/K. OTM is `[lower, atm_low)`, ATM `[atm_low, atm_high]`,
/// ITM `(atm_high, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoneynessBands {
    pub lower: f64,
    pub atm_low: f64,
    pub atm_high: f64,
    pub upper: f64,
}

impl Default for MoneynessBands {
    fn default() -> Self {
        Self { lower: 0.8, atm_low: 0.95, atm_high: 1.05, upper: 1.2 }
    }
}

impl MoneynessBands {
    pub fn classify(&self, s_over_k: f64) -> Result<MoneynessCategory, DataError> {
        if !(s_over_k >= self.lower && s_over_k <= self.upper) {
            return Err(DataError::OutOfBand(s_over_k));
        }
        Ok(if s_over_k < self.atm_low {
            MoneynessCategory::Otm
        } else if s_over_k <= self.atm_high {
            MoneynessCategory::Atm
        } else {
            MoneynessCategory::Itm
        })
    }
}

pub fn classify_moneyness(s_over_k: f64) -> Result<MoneynessCategory, DataError> {
    MoneynessBands::default().classify(s_over_k)
}

/// Why [`build_features`] skipped quotes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildDiagnostics {
    pub missing_underlying: usize,
    pub missing_rate: usize,
    pub insufficient_history: usize,
    pub invalid_quote: usize,
}

impl BuildDiagnostics {
    pub fn total(&self) -> usize {
        self.missing_underlying + self.missing_rate + self.insufficient_history + self.invalid_quote
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBuild {
    pub rows: Vec<FeatureRow>,
    pub diagnostics: BuildDiagnostics,
}

enum Skip {
    Underlying,
    Rate,
    History,
    Invalid,
}

type VolTable = HashMap<String, HashMap<NaiveDate, [f64; 6]>>;

fn vol_table(underlying: &UnderlyingSeries) -> Result<VolTable, DataError> {
    let per_ticker = |(ticker, series): (&String, &Vec<(NaiveDate, f64)>)| {
        let map = rolling_vols(series, &VOL_WINDOWS)?;
        let dated = map
            .into_iter()
            .map(|(d, est)| {
                let mut s = [0.0; 6];
                for (slot, e) in s.iter_mut().zip(est) {
                    *slot = e.value;
                }
                (d, s)
            })
            .collect::<HashMap<_, _>>();
        Ok::<_, DataError>((ticker.clone(), dated))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let items: Vec<_> = underlying.iter().collect();
        items.into_par_iter().map(per_ticker).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        underlying.iter().map(per_ticker).collect()
    }
}

fn close_lookup(underlying: &UnderlyingSeries) -> HashMap<(&str, NaiveDate), f64> {
    underlying.iter().flat_map(|(t, s)| s.iter().map(move |(d, p)| ((t.as_str(), *d), *p))).collect()
}

fn featurize(
    q: &QuoteRecord,
    closes: &HashMap<(&str, NaiveDate), f64>,
    rates: &RateSeries,
    vols: &VolTable,
) -> Result<FeatureRow, Skip> {
    let spot = *closes.get(&(q.ticker.as_str(), q.quote_date)).ok_or(Skip::Underlying)?;
    let rate = *rates.get(&q.quote_date).ok_or(Skip::Rate)?;
    let quote = OptionQuote::join(q, spot, rate).map_err(|_| Skip::Invalid)?;
    let sigma = *vols.get(&q.ticker).and_then(|m| m.get(&q.quote_date)).ok_or(Skip::History)?;
    let strike = quote.strike().map_err(|_| Skip::Invalid)?;
    let mid = quote.mid_price().map_err(|_| Skip::Invalid)?;
    let days = (quote.expiry_date - quote.quote_date).num_days() as f64;
    Ok(FeatureRow {
        quote_date: quote.quote_date,
        ticker: quote.ticker,
        s_over_k: spot / strike,
        strike,
        ttm_years: days / DAYS_PER_YEAR,
        rate,
        sigma,
        target: mid / strike,
    })
}

/// Join quotes with closes, rates and rolling vols. Quotes that cannot be
/// completed are skipped and counted; output keeps the input order.
pub fn build_features(
    quotes: &[QuoteRecord],
    underlying: &UnderlyingSeries,
    rates: &RateSeries,
) -> Result<FeatureBuild, DataError> {
    let vols = vol_table(underlying)?;
    let closes = close_lookup(underlying);

    #[cfg(feature = "parallel")]
    let results: Vec<Result<FeatureRow, Skip>> = {
        use rayon::prelude::*;
        quotes.par_iter().map(|q| featurize(q, &closes, rates, &vols)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<FeatureRow, Skip>> = quotes.iter().map(|q| featurize(q, &closes, rates, &vols)).collect();

    let mut diagnostics = BuildDiagnostics::default();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(Skip::Underlying) => diagnostics.missing_underlying += 1,
            Err(Skip::Rate) => diagnostics.missing_rate += 1,
            Err(Skip::History) => diagnostics.insufficient_history += 1,
            Err(Skip::Invalid) => diagnostics.invalid_quote += 1,
        }
    }
    Ok(FeatureBuild { rows, diagnostics })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    Maturity,
    Moneyness,
    Arbitrage,
}

/// Per-reason drop counts. A row failing several predicates is counted once,
/// under the first failing one in the order maturity, moneyness, arbitrage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub maturity: usize,
    pub moneyness: usize,
    pub arbitrage: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.maturity + self.moneyness + self.arbitrage
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<FeatureRow>,
    pub dropped: DropCounts,
}

/// First predicate the row violates, if any.
///
/// The no-arbitrage check runs on strike-normalized quantities:
/// `C < S - K e^{-r tau}` divided through by `K` is
/// `target < s_over_k - e^{-r tau}`.
pub fn drop_reason(row: &FeatureRow) -> Option<DropReason> {
    if !(row.ttm_years >= MIN_TTM_DAYS / DAYS_PER_YEAR) {
        return Some(DropReason::Maturity);
    }
    let bands = MoneynessBands::default();
    if !(row.s_over_k >= bands.lower && row.s_over_k <= bands.upper) {
        return Some(DropReason::Moneyness);
    }
    if row.target < row.s_over_k - (-row.rate * row.ttm_years).exp() {
        return Some(DropReason::Arbitrage);
    }
    None
}

pub fn filter_rows(rows: Vec<FeatureRow>) -> FilterOutcome {
    let mut dropped = DropCounts::default();
    let mut kept = Vec::with_capacity(rows.len());
    for row in rows {
        match drop_reason(&row) {
            None => kept.push(row),
            Some(DropReason::Maturity) => dropped.maturity += 1,
            Some(DropReason::Moneyness) => dropped.moneyness += 1,
            Some(DropReason::Arbitrage) => dropped.arbitrage += 1,
        }
    }
    FilterOutcome { kept, dropped }
}
