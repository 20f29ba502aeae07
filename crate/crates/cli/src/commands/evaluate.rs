use std::path::Path;

use optlab_core::evaluation::{bs_baseline, bs_window_table, evaluate, window_table_text, EvalReport, EvalSummary};
use optlab_core::market_data::FeatureRow;
use serde_json::{json, Value};

use crate::commands::train::TrainedModel;
use crate::config::{check_name, EvaluateRun};
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, write_csv, write_json, write_text};
use crate::prepared;

pub const REPORT_COLUMNS: [&str; 13] = [
    "model",
    "slice",
    "key",
    "n",
    "mse",
    "rmse",
    "mae",
    "over",
    "under",
    "correct",
    "pct_over",
    "pct_under",
    "pct_correct",
];
pub const PAIR_COLUMNS: [&str; 6] = ["quote_date", "ticker", "s_over_k", "ttm_years", "actual", "predicted"];
pub const WINDOW_COLUMNS: [&str; 4] = ["window", "mse", "rmse", "mae"];
pub const WINDOW_TABLE_CSV: &str = "bs_windows.csv";
pub const WINDOW_TABLE_TXT: &str = "bs_windows.txt";

pub fn bs_name(window: usize) -> String {
    format!("bs_sigma_{window}")
}

pub fn report_json(out: &Path, model: &str) -> std::path::PathBuf {
    out.join(format!("{model}.report.json"))
}

fn summary_row(model: &str, slice: &str, key: &str, s: &EvalSummary) -> Vec<String> {
    vec![
        model.into(),
        slice.into(),
        key.into(),
        s.n.to_string(),
        s.mse.to_string(),
        s.rmse.to_string(),
        s.mae.to_string(),
        s.over.to_string(),
        s.under.to_string(),
        s.correct.to_string(),
        s.pct_over.to_string(),
        s.pct_under.to_string(),
        s.pct_correct.to_string(),
    ]
}

/// Overall row first, then tickers, then moneyness bands.
pub fn report_rows(r: &EvalReport) -> Vec<Vec<String>> {
    let mut rows = vec![summary_row(&r.model, "overall", "all", &r.overall)];
    rows.extend(r.by_ticker.iter().map(|(k, s)| summary_row(&r.model, "ticker", k, s)));
    rows.extend(r.by_moneyness.iter().map(|(k, s)| summary_row(&r.model, "moneyness", k, s)));
    rows
}

fn write_report(out: &Path, report: &EvalReport, pred: &[f64], rows: &[FeatureRow]) -> Result<()> {
    let m = &report.model;
    write_json(&report_json(out, m), report)?;
    write_csv(&out.join(format!("{m}.report.csv")), &REPORT_COLUMNS, &report_rows(report))?;
    let pairs: Vec<Vec<String>> = rows
        .iter()
        .zip(pred)
        .map(|(r, p)| {
            vec![
                r.quote_date.to_string(),
                r.ticker.clone(),
                r.s_over_k.to_string(),
                r.ttm_years.to_string(),
                r.target.to_string(),
                p.to_string(),
            ]
        })
        .collect();
    write_csv(&out.join(format!("{m}.pairs.csv")), &PAIR_COLUMNS, &pairs)
}

fn headline(r: &EvalReport) -> Value {
    json!({ "model": r.model, "n": r.overall.n, "mse": r.overall.mse, "rmse": r.overall.rmse, "mae": r.overall.mae })
}

/// Scores every listed model and each requested baseline window on the test split.
pub fn run(cfg: &EvaluateRun, out: &Path) -> Result<Value> {
    let (_, split) = prepared::load(&cfg.data_dir)?;
    let test = &split.test;
    ensure_dir(out)?;
    let mut reports = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut claim = |name: &str| -> Result<()> {
        check_name(name).map_err(CliError::Usage)?;
        if !seen.insert(name.to_string()) {
            return Err(CliError::Usage(format!("model name `{name}` appears twice")));
        }
        Ok(())
    };

    for m in &cfg.models {
        let (meta, model) = TrainedModel::load(&m.dir)?;
        let name = m.name.clone().unwrap_or(meta.name);
        claim(&name)?;
        let (data, target_rows) = prepared::dataset(test, meta.spec.timesteps, meta.windowing)?;
        let pred = model.predict(&data.x)?;
        let rows: Vec<FeatureRow> = target_rows.iter().map(|&i| test[i].clone()).collect();
        let report = evaluate(&name, &pred, &rows, cfg.margin, &cfg.bands)?;
        write_report(out, &report, &pred, &rows)?;
        reports.push(headline(&report));
    }
    for &w in &cfg.bs_windows {
        let name = bs_name(w);
        claim(&name)?;
        let pred = bs_baseline(test, w)?;
        let report = evaluate(&name, &pred, test, cfg.margin, &cfg.bands)?;
        write_report(out, &report, &pred, test)?;
        reports.push(headline(&report));
    }

    let table = bs_window_table(test)?;
    let csv_rows: Vec<Vec<String>> = table
        .iter()
        .map(|(w, m)| vec![w.to_string(), m.mse.to_string(), m.rmse.to_string(), m.mae.to_string()])
        .collect();
    write_csv(&out.join(WINDOW_TABLE_CSV), &WINDOW_COLUMNS, &csv_rows)?;
    write_text(&out.join(WINDOW_TABLE_TXT), &window_table_text(&table))?;

    Ok(json!({
        "command": "evaluate",
        "test_rows": test.len(),
        "reports": reports,
        "bs_windows": table.iter().map(|(w, m)| json!({ "window": w, "mse": m.mse })).collect::<Vec<_>>(),
    }))
}
