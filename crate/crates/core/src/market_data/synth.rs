//! Synthetic option chains: GBM underlyings, a random-walk short rate, and
//! call quotes priced by the closed form.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::features::{RateSeries, UnderlyingSeries, DAYS_PER_YEAR};
use super::quote::{QuoteRecord, STRIKE_SCALE};
use super::DataError;
use crate::bs::{bs_call_price, BsInputs};
use crate::seed::stream_rng;
use crate::vol::{realized_vol, TRADING_DAYS, VOL_WINDOWS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TickerSpec {
    pub name: String,
    pub spot: f64,
    /// Annual drift of the GBM.
    pub drift: f64,
    /// Annual volatility of the GBM.
    pub vol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatePath {
    pub initial: f64,
    /// Standard deviation of the daily rate change; the path is floored at 0.
    pub daily_vol: f64,
}

/// Volatility fed to the pricer for each quote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum PricingVol {
    /// The ticker's GBM volatility.
    Constant,
    /// Trailing realized volatility over `window` returns up to the quote date.
    Realized { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub tickers: Vec<TickerSpec>,
    pub start_date: NaiveDate,
    /// Business days of history simulated before the first quote date.
    #[serde(default = "default_warmup")]
    pub warmup_days: usize,
    /// Business days carrying quotes.
    pub quote_days: usize,
    /// Strike as a multiple of the day's spot.
    pub strike_grid: Vec<f64>,
    /// Calendar days from quote date to expiry.
    pub expiry_days: Vec<u32>,
    pub rate: RatePath,
    pub pricing_vol: PricingVol,
    /// Bid and offer sit at `price * (1 -/+ half_spread)`.
    #[serde(default)]
    pub half_spread: f64,
    /// Multiplicative noise amplitude: price is scaled by `1 + u`, `u ~ U(-noise, noise)`.
    #[serde(default)]
    pub noise: f64,
}

fn default_warmup() -> usize {
    VOL_WINDOWS[VOL_WINDOWS.len() - 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub quotes: Vec<QuoteRecord>,
    pub underlying: UnderlyingSeries,
    pub rates: RateSeries,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::Config(m.to_string()));
        if self.tickers.is_empty() {
            return bad("no tickers");
        }
        if self.quote_days == 0 {
            return bad("empty date range");
        }
        if self.strike_grid.is_empty() || self.strike_grid.iter().any(|m| !(*m > 0.0)) {
            return bad("strike grid must be non-empty and positive");
        }
        if self.expiry_days.is_empty() || self.expiry_days.contains(&0) {
            return bad("expiry days must be non-empty and positive");
        }
        if self.tickers.iter().any(|t| !(t.spot > 0.0 && t.vol >= 0.0)) {
            return bad("ticker spot must be positive and vol non-negative");
        }
        if !(self.half_spread >= 0.0 && self.half_spread < 1.0) || !(self.noise >= 0.0 && self.noise < 1.0) {
            return bad("half_spread and noise must lie in [0, 1)");
        }
        if let PricingVol::Realized { window } = self.pricing_vol {
            if window < 2 || self.warmup_days < window {
                return bad("realized pricing vol needs window >= 2 and warmup_days >= window");
            }
        }
        Ok(())
    }

    pub fn expected_quotes(&self) -> usize {
        self.tickers.len() * self.quote_days * self.strike_grid.len() * self.expiry_days.len()
    }
}

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

const RATE_STREAM: u64 = 1 << 32;
const NOISE_STREAM: u64 = (1 << 32) + 1;

/// Deterministic for a fixed `(config, seed)`.
pub fn generate_synthetic_dataset(cfg: &SynthConfig, seed: u64) -> Result<SynthData, DataError> {
    cfg.validate()?;
    let total = cfg.warmup_days + cfg.quote_days;
    let dates = business_days(cfg.start_date, total);
    let dt = 1.0 / TRADING_DAYS as f64;

    let mut rate_rng = stream_rng(seed, RATE_STREAM);
    let mut rate_path = Vec::with_capacity(total);
    let mut r = cfg.rate.initial;
    for _ in 0..total {
        rate_path.push(r);
        let z: f64 = rate_rng.sample(StandardNormal);
        r = (r + cfg.rate.daily_vol * z).max(0.0);
    }

    let paths: Vec<Vec<f64>> = cfg
        .tickers
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mut rng = stream_rng(seed, k as u64);
            let mut s = t.spot;
            let mut path = Vec::with_capacity(total);
            for _ in 0..total {
                path.push(s);
                let z: f64 = rng.sample(StandardNormal);
                s *= ((t.drift - 0.5 * t.vol * t.vol) * dt + t.vol * dt.sqrt() * z).exp();
            }
            path
        })
        .collect();

    let mut noise_rng = stream_rng(seed, NOISE_STREAM);
    let mut quotes = Vec::with_capacity(cfg.expected_quotes());
    for day in cfg.warmup_days..total {
        let date = dates[day];
        let rate = rate_path[day];
        for (ticker, path) in cfg.tickers.iter().zip(&paths) {
            let spot = path[day];
            let vol = match cfg.pricing_vol {
                PricingVol::Constant => ticker.vol,
                PricingVol::Realized { window } => {
                    realized_vol(&path[..=day], window, TRADING_DAYS).map_err(|e| DataError::Config(e.to_string()))?
                }
            };
            for &expiry in &cfg.expiry_days {
                let ttm = expiry as f64 / DAYS_PER_YEAR;
                for &m in &cfg.strike_grid {
                    let strike_raw = (spot * m * STRIKE_SCALE).round().max(1.0);
                    let strike = strike_raw / STRIKE_SCALE;
                    let p =
                        BsInputs::new(spot, strike, rate, vol, ttm).map_err(|e| DataError::Config(e.to_string()))?;
                    let mut price = bs_call_price(&p).map_err(|e| DataError::Config(e.to_string()))?;
                    if cfg.noise > 0.0 {
                        let u: f64 = noise_rng.random_range(-cfg.noise..cfg.noise);
                        price *= 1.0 + u;
                    }
                    quotes.push(QuoteRecord {
                        quote_date: date,
                        expiry_date: date + Days::new(expiry as u64),
                        ticker: ticker.name.clone(),
                        best_bid: price * (1.0 - cfg.half_spread),
                        best_offer: price * (1.0 + cfg.half_spread),
                        strike_price: strike_raw,
                    });
                }
            }
        }
    }

    let underlying = cfg
        .tickers
        .iter()
        .zip(&paths)
        .map(|(t, path)| (t.name.clone(), dates.iter().copied().zip(path.iter().copied()).collect()))
        .collect();
    let rates = dates.iter().copied().zip(rate_path).collect();
    Ok(SynthData { quotes, underlying, rates })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::market_data::features::{build_features, filter_rows};

    pub(crate) fn config() -> SynthConfig {
        SynthConfig {
            tickers: vec![
                TickerSpec { name: "SPX".into(), spot: 4000.0, drift: 0.05, vol: 0.18 },
                TickerSpec { name: "NDX".into(), spot: 12000.0, drift: 0.07, vol: 0.25 },
            ],
            start_date: NaiveDate::from_ymd_opt(2018, 1, 2).unwrap(),
            warmup_days: 90,
            quote_days: 100,
            strike_grid: (0..10).map(|i| 0.85 + 0.03 * i as f64).collect(),
            expiry_days: vec![30, 60, 120, 240],
            rate: RatePath { initial: 0.02, daily_vol: 0.0005 },
            pricing_vol: PricingVol::Realized { window: 90 },
            half_spread: 0.0,
            noise: 0.0,
        }
    }

    #[test]
    fn counts() {
        let cfg = config();
        let data = generate_synthetic_dataset(&cfg, 1).unwrap();
        assert_eq!(data.quotes.len(), 8000);
        assert_eq!(cfg.expected_quotes(), 8000);
        assert_eq!(data.rates.len(), 190);
        assert!(data.underlying.values().all(|s| s.len() == 190));
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig { noise: 0.01, half_spread: 0.02, ..config() };
        assert_eq!(generate_synthetic_dataset(&cfg, 5).unwrap(), generate_synthetic_dataset(&cfg, 5).unwrap());
        assert_ne!(generate_synthetic_dataset(&cfg, 5).unwrap(), generate_synthetic_dataset(&cfg, 6).unwrap());
    }

    #[test]
    fn zero_spread_and_noise_mid_is_model_price() {
        let cfg = SynthConfig { pricing_vol: PricingVol::Constant, ..config() };
        let data = generate_synthetic_dataset(&cfg, 3).unwrap();
        let q = &data.quotes[17];
        let spot = data.underlying[&q.ticker].iter().find(|(d, _)| *d == q.quote_date).unwrap().1;
        let rate = data.rates[&q.quote_date];
        let ttm = (q.expiry_date - q.quote_date).num_days() as f64 / 365.0;
        let vol = cfg.tickers.iter().find(|t| t.name == q.ticker).unwrap().vol;
        let price = bs_call_price(&BsInputs::new(spot, q.strike().unwrap(), rate, vol, ttm).unwrap()).unwrap();
        assert_eq!(q.mid_price().unwrap(), price);
    }

    #[test]
    fn round_trip_through_features_reproduces_model_price() {
        let cfg = config();
        let data = generate_synthetic_dataset(&cfg, 11).unwrap();
        let built = build_features(&data.quotes, &data.underlying, &data.rates).unwrap();
        assert_eq!(built.rows.len(), data.quotes.len());
        let kept = filter_rows(built.rows).kept;
        assert!(!kept.is_empty());
        for row in &kept {
            let p =
                BsInputs::new(row.s_over_k * row.strike, row.strike, row.rate, row.sigma[5], row.ttm_years).unwrap();
            let want = bs_call_price(&p).unwrap() / row.strike;
            assert!((row.target - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_grids() {
        assert!(generate_synthetic_dataset(&SynthConfig { strike_grid: vec![], ..config() }, 0).is_err());
        assert!(generate_synthetic_dataset(&SynthConfig { quote_days: 0, ..config() }, 0).is_err());
        assert!(generate_synthetic_dataset(&SynthConfig { expiry_days: vec![], ..config() }, 0).is_err());
    }
}
