#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

pub struct Outcome {
    pub code: i32,
    pub stdout: Value,
    pub stderr: String,
}

/// Runs the `optlab` binary in `dir`.
pub fn optlab(dir: &Path, args: &[&str]) -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_optlab")).args(args).current_dir(dir).output().expect("spawn optlab");
    let text = String::from_utf8_lossy(&out.stdout);
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stdout: serde_json::from_str(text.trim()).unwrap_or(Value::Null),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Like [`optlab`] but panics with stderr on failure.
pub fn ok(dir: &Path, args: &[&str]) -> Value {
    let o = optlab(dir, args);
    assert_eq!(o.code, 0, "optlab {args:?} failed: {}", o.stderr);
    o.stdout
}

pub fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    std::fs::write(dir.join(name), serde_json::to_string_pretty(v).unwrap()).unwrap();
    name.to_string()
}

pub const TICKERS: [(&str, f64, f64, f64); 4] = [
    ("SPX", 4000.0, 0.06, 0.18),
    ("NDX", 12000.0, 0.08, 0.25),
    ("RUT", 1800.0, 0.04, 0.28),
    ("DJX", 340.0, 0.05, 0.15),
];

/// Quotes = tickers x quote_days x 8 strikes x 5 expiries, priced off the
/// trailing `window`-day realized vol.
pub fn synth_config(seed: u64, tickers: usize, quote_days: usize, noise: f64, window: usize) -> Value {
    let tickers: Vec<Value> =
        TICKERS[..tickers].iter().map(|(n, s, d, v)| json!({ "name": n, "spot": s, "drift": d, "vol": v })).collect();
    json!({
        "seed": seed,
        "dataset": {
            "tickers": tickers,
            "start_date": "2022-01-03",
            "quote_days": quote_days,
            "strike_grid": [0.86, 0.9, 0.94, 0.98, 1.02, 1.06, 1.1, 1.14],
            "expiry_days": [30, 60, 91, 182, 365],
            "rate": { "initial": 0.03, "daily_vol": 0.0005 },
            "pricing_vol": { "kind": "realized", "window": window },
            "half_spread": 0.002,
            "noise": noise,
        }
    })
}

pub fn mlp_layers(width: usize, depth: usize) -> Value {
    Value::Array((0..depth).map(|_| json!({ "kind": "dense", "units": width, "activation": "tanh" })).collect())
}

pub fn kan_layers(width: usize, degrees: &[usize], dropout: f64) -> Value {
    let mut layers = vec![json!({ "kind": "dense", "units": width, "activation": "linear" })];
    for d in degrees {
        layers.push(json!({ "kind": "kan", "units": width, "degree": d, "family": "chebyshev2", "dropout": dropout }));
    }
    Value::Array(layers)
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}
