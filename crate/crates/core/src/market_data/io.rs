//! CSV reading and writing.
//!
//! Headers are matched after passing through [`COLUMN_ALIASES`], so vendor
//! exports with their own column names load without preprocessing. Every
//! parse failure reports the file and line.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;

use super::features::{FeatureRow, RateSeries, UnderlyingSeries};
use super::quote::QuoteRecord;
use super::synth::SynthData;
use super::DataError;

/// Vendor column name to canonical column name.
pub const COLUMN_ALIASES: &[(&str, &str)] = &[
    ("date", "quote_date"),
    ("exdate", "expiry_date"),
    ("expiration", "expiry_date"),
    ("symbol", "ticker"),
    ("root", "ticker"),
    ("best_ask", "best_offer"),
    ("strike_raw", "strike_price"),
    ("rate", "rate_decimal"),
];

pub const QUOTE_COLUMNS: [&str; 6] = ["quote_date", "expiry_date", "ticker", "best_bid", "best_offer", "strike_price"];
pub const UNDERLYING_COLUMNS: [&str; 3] = ["date", "ticker", "close"];
pub const RATE_COLUMNS: [&str; 2] = ["date", "rate_decimal"];
pub const FEATURE_COLUMNS: [&str; 13] = [
    "quote_date",
    "ticker",
    "s_over_k",
    "strike",
    "ttm_years",
    "rate",
    "sigma_20",
    "sigma_30",
    "sigma_40",
    "sigma_50",
    "sigma_65",
    "sigma_90",
    "target",
];

pub const QUOTES_FILE: &str = "quotes.csv";
pub const UNDERLYING_FILE: &str = "underlying.csv";
pub const RATES_FILE: &str = "rates.csv";

fn canonical(name: &str, wanted: &[&str]) -> String {
    let name = name.trim().to_ascii_lowercase();
    if wanted.contains(&name.as_str()) {
        return name;
    }
    COLUMN_ALIASES
        .iter()
        .find(|(alias, target)| *alias == name && wanted.contains(target))
        .map_or(name, |(_, target)| target.to_string())
}

struct Table {
    rows: Vec<(u64, csv::StringRecord)>,
    index: HashMap<&'static str, usize>,
}

fn schema(path: &Path, line: u64, message: impl Into<String>) -> DataError {
    DataError::Schema { path: path.to_path_buf(), line, message: message.into() }
}

fn read_table(path: &Path, wanted: &[&'static str]) -> Result<Table, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| schema(path, 1, e.to_string()))?.clone();
    let names: Vec<String> = headers.iter().map(|h| canonical(h, wanted)).collect();
    let mut index = HashMap::new();
    for col in wanted {
        match names.iter().position(|n| n == col) {
            Some(i) => {
                index.insert(*col, i);
            }
            None => return Err(schema(path, 1, format!("missing column `{col}`"))),
        }
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            schema(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    Ok(Table { rows, index })
}

impl Table {
    fn field<T: FromStr>(&self, path: &Path, row: usize, col: &str) -> Result<T, DataError>
    where
        T::Err: std::fmt::Display,
    {
        let (line, rec) = &self.rows[row];
        let raw = rec.get(self.index[col]).unwrap_or("").trim();
        raw.parse().map_err(|e| schema(path, *line, format!("column `{col}`: cannot parse {raw:?}: {e}")))
    }
}

pub fn read_quotes(path: &Path) -> Result<Vec<QuoteRecord>, DataError> {
    let t = read_table(path, &QUOTE_COLUMNS)?;
    (0..t.rows.len())
        .map(|i| {
            Ok(QuoteRecord {
                quote_date: t.field::<NaiveDate>(path, i, "quote_date")?,
                expiry_date: t.field::<NaiveDate>(path, i, "expiry_date")?,
                ticker: t.field::<String>(path, i, "ticker")?,
                best_bid: t.field(path, i, "best_bid")?,
                best_offer: t.field(path, i, "best_offer")?,
                strike_price: t.field(path, i, "strike_price")?,
            })
        })
        .collect()
}

/// Closes are sorted ascending by date per ticker; duplicate dates are rejected.
pub fn read_underlying(path: &Path) -> Result<UnderlyingSeries, DataError> {
    let t = read_table(path, &UNDERLYING_COLUMNS)?;
    let mut out = UnderlyingSeries::new();
    let mut lines: HashMap<(String, NaiveDate), u64> = HashMap::new();
    for i in 0..t.rows.len() {
        let date: NaiveDate = t.field(path, i, "date")?;
        let ticker: String = t.field(path, i, "ticker")?;
        let close: f64 = t.field(path, i, "close")?;
        let line = t.rows[i].0;
        if let Some(first) = lines.insert((ticker.clone(), date), line) {
            return Err(schema(path, line, format!("duplicate close for {ticker} on {date} (first at line {first})")));
        }
        out.entry(ticker).or_default().push((date, close));
    }
    for series in out.values_mut() {
        series.sort_by_key(|(d, _)| *d);
    }
    Ok(out)
}

pub fn read_rates(path: &Path) -> Result<RateSeries, DataError> {
    let t = read_table(path, &RATE_COLUMNS)?;
    let mut out = RateSeries::new();
    for i in 0..t.rows.len() {
        let date: NaiveDate = t.field(path, i, "date")?;
        if out.insert(date, t.field(path, i, "rate_decimal")?).is_some() {
            return Err(schema(path, t.rows[i].0, format!("duplicate rate for {date}")));
        }
    }
    Ok(out)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureRow>, DataError> {
    let t = read_table(path, &FEATURE_COLUMNS)?;
    (0..t.rows.len())
        .map(|i| {
            let mut sigma = [0.0; 6];
            for (k, slot) in sigma.iter_mut().enumerate() {
                *slot = t.field(path, i, FEATURE_COLUMNS[6 + k])?;
            }
            Ok(FeatureRow {
                quote_date: t.field(path, i, "quote_date")?,
                ticker: t.field(path, i, "ticker")?,
                s_over_k: t.field(path, i, "s_over_k")?,
                strike: t.field(path, i, "strike")?,
                ttm_years: t.field(path, i, "ttm_years")?,
                rate: t.field(path, i, "rate")?,
                sigma,
                target: t.field(path, i, "target")?,
            })
        })
        .collect()
}

fn writer(path: &Path) -> Result<csv::Writer<File>, DataError> {
    let file = File::create(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), DataError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| schema(path, 0, e.to_string());
    let mut w = writer(path)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

// `Display` for f64 prints the shortest string that parses back to the same bits.
pub fn write_quotes(path: &Path, quotes: &[QuoteRecord]) -> Result<(), DataError> {
    write_rows(
        path,
        &QUOTE_COLUMNS,
        quotes.iter().map(|q| {
            vec![
                q.quote_date.to_string(),
                q.expiry_date.to_string(),
                q.ticker.clone(),
                q.best_bid.to_string(),
                q.best_offer.to_string(),
                q.strike_price.to_string(),
            ]
        }),
    )
}

pub fn write_underlying(path: &Path, series: &UnderlyingSeries) -> Result<(), DataError> {
    write_rows(
        path,
        &UNDERLYING_COLUMNS,
        series.iter().flat_map(|(t, s)| s.iter().map(move |(d, c)| vec![d.to_string(), t.clone(), c.to_string()])),
    )
}

pub fn write_rates(path: &Path, rates: &RateSeries) -> Result<(), DataError> {
    write_rows(path, &RATE_COLUMNS, rates.iter().map(|(d, r)| vec![d.to_string(), r.to_string()]))
}

pub fn write_features(path: &Path, rows: &[FeatureRow]) -> Result<(), DataError> {
    write_rows(
        path,
        &FEATURE_COLUMNS,
        rows.iter().map(|r| {
            let mut v = vec![
                r.quote_date.to_string(),
                r.ticker.clone(),
                r.s_over_k.to_string(),
                r.strike.to_string(),
                r.ttm_years.to_string(),
                r.rate.to_string(),
            ];
            v.extend(r.sigma.iter().map(f64::to_string));
            v.push(r.target.to_string());
            v
        }),
    )
}

/// Writes `quotes.csv`, `underlying.csv` and `rates.csv` into `dir`.
pub fn write_dataset(dir: &Path, data: &SynthData) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io { path: dir.to_path_buf(), source })?;
    write_quotes(&dir.join(QUOTES_FILE), &data.quotes)?;
    write_underlying(&dir.join(UNDERLYING_FILE), &data.underlying)?;
    write_rates(&dir.join(RATES_FILE), &data.rates)
}

pub fn read_dataset(dir: &Path) -> Result<SynthData, DataError> {
    Ok(SynthData {
        quotes: read_quotes(&dir.join(QUOTES_FILE))?,
        underlying: read_underlying(&dir.join(UNDERLYING_FILE))?,
        rates: read_rates(&dir.join(RATES_FILE))?,
    })
}
