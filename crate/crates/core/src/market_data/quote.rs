use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::DataError;

/// Strike column convention of the vendor feed: strikes are stored times 1000.
pub const STRIKE_SCALE: f64 = 1000.0;

/// One row of the quotes CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteRecord {
    pub quote_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub ticker: String,
    pub best_bid: f64,
    pub best_offer: f64,
    /// Strike times 1000.
    pub strike_price: f64,
}

impl QuoteRecord {
    pub fn mid_price(&self) -> Result<f64, DataError> {
        mid_price(self.best_bid, self.best_offer)
    }

    pub fn strike(&self) -> Result<f64, DataError> {
        normalize_strike(self.strike_price)
    }
}

/// A quote joined with the underlying close and the risk-free rate of its date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub quote_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub ticker: String,
    pub best_bid: f64,
    pub best_offer: f64,
    pub strike_raw: f64,
    pub underlying_close: f64,
    pub risk_free_rate: f64,
}

impl OptionQuote {
    pub fn join(q: &QuoteRecord, underlying_close: f64, risk_free_rate: f64) -> Result<Self, DataError> {
        let joined = Self {
            quote_date: q.quote_date,
            expiry_date: q.expiry_date,
            ticker: q.ticker.clone(),
            best_bid: q.best_bid,
            best_offer: q.best_offer,
            strike_raw: q.strike_price,
            underlying_close,
            risk_free_rate,
        };
        joined.validate()?;
        Ok(joined)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidQuote(msg));
        if !(self.best_bid >= 0.0 && self.best_offer >= self.best_bid) {
            return bad(format!("bid {} / offer {} not ordered and non-negative", self.best_bid, self.best_offer));
        }
        if self.expiry_date <= self.quote_date {
            return bad(format!("expiry {} not after quote date {}", self.expiry_date, self.quote_date));
        }
        if !(self.strike_raw > 0.0) {
            return bad(format!("strike {} not positive", self.strike_raw));
        }
        if !(self.underlying_close > 0.0) {
            return bad(format!("underlying close {} not positive", self.underlying_close));
        }
        if !self.risk_free_rate.is_finite() {
            return bad("risk-free rate not finite".into());
        }
        Ok(())
    }

    pub fn mid_price(&self) -> Result<f64, DataError> {
        mid_price(self.best_bid, self.best_offer)
    }

    pub fn strike(&self) -> Result<f64, DataError> {
        normalize_strike(self.strike_raw)
    }
}

pub fn mid_price(best_bid: f64, best_offer: f64) -> Result<f64, DataError> {
    if !(best_bid >= 0.0 && best_offer >= 0.0) {
        return Err(DataError::InvalidQuote(format!("negative bid {best_bid} or offer {best_offer}")));
    }
    Ok((best_bid + best_offer) / 2.0)
}

pub fn normalize_strike(strike_raw: f64) -> Result<f64, DataError> {
    if !(strike_raw > 0.0 && strike_raw.is_finite()) {
        return Err(DataError::InvalidQuote(format!("strike {strike_raw} not positive")));
    }
    Ok(strike_raw / STRIKE_SCALE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_examples() {
        assert_eq!(mid_price(10.0, 12.0).unwrap(), 11.0);
        assert_eq!(mid_price(0.0, 0.0).unwrap(), 0.0);
        assert!((mid_price(3.2, 3.6).unwrap() - 3.4).abs() < 1e-15);
        assert!(mid_price(-1.0, 2.0).is_err());
    }

    #[test]
    fn strike_examples() {
        assert_eq!(normalize_strike(4_500_000.0).unwrap(), 4500.0);
        assert_eq!(normalize_strike(1000.0).unwrap(), 1.0);
        assert_eq!(normalize_strike(2_537_500.0).unwrap(), 2537.5);
        assert!(normalize_strike(0.0).is_err());
        assert!(normalize_strike(-5.0).is_err());
    }

    #[test]
    fn join_checks_invariants() {
        let d = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let q = QuoteRecord {
            quote_date: d,
            expiry_date: d,
            ticker: "SPX".into(),
            best_bid: 1.0,
            best_offer: 2.0,
            strike_price: 1000.0,
        };
        assert!(OptionQuote::join(&q, 100.0, 0.01).is_err());
        let later = QuoteRecord { expiry_date: d + chrono::Days::new(30), ..q.clone() };
        assert!(OptionQuote::join(&later, 100.0, 0.01).is_ok());
        let crossed = QuoteRecord { best_bid: 3.0, ..later };
        assert!(OptionQuote::join(&crossed, 100.0, 0.01).is_err());
    }
}
