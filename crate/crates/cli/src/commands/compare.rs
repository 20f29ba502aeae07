use std::path::Path;

use optlab_core::evaluation::{text_table, EvalReport, REPORT_SCHEMA};
use serde_json::{json, Value};

use crate::config::{self, CompareRun};
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, write_csv, write_text};

pub const COMPARE_COLUMNS: [&str; 9] =
    ["rank", "model", "n", "mse", "rmse", "mae", "pct_over", "pct_under", "pct_correct"];
pub const COMPARE_CSV: &str = "comparison.csv";
pub const COMPARE_TXT: &str = "comparison.txt";

/// Reports in ascending mse; ties keep their input order.
pub fn rank(mut reports: Vec<EvalReport>) -> Vec<EvalReport> {
    reports.sort_by(|a, b| a.overall.mse.total_cmp(&b.overall.mse));
    reports
}

pub fn run(cfg: &CompareRun, out: &Path) -> Result<Value> {
    let mut reports = Vec::with_capacity(cfg.reports.len());
    for path in &cfg.reports {
        let raw: Value = config::load(path)?;
        let schema = raw.get("schema").and_then(Value::as_u64);
        if schema != Some(REPORT_SCHEMA as u64) {
            return Err(CliError::Format {
                path: path.clone(),
                message: format!("report schema {schema:?} is incompatible with {REPORT_SCHEMA}"),
            });
        }
        let report: EvalReport =
            serde_json::from_value(raw).map_err(|e| CliError::Format { path: path.clone(), message: e.to_string() })?;
        reports.push(report);
    }
    let ranked = rank(reports);
    let rows: Vec<Vec<String>> = ranked
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s = &r.overall;
            vec![
                (i + 1).to_string(),
                r.model.clone(),
                s.n.to_string(),
                s.mse.to_string(),
                s.rmse.to_string(),
                s.mae.to_string(),
                s.pct_over.to_string(),
                s.pct_under.to_string(),
                s.pct_correct.to_string(),
            ]
        })
        .collect();
    ensure_dir(out)?;
    write_csv(&out.join(COMPARE_CSV), &COMPARE_COLUMNS, &rows)?;
    let pretty: Vec<Vec<String>> = ranked
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s = &r.overall;
            vec![
                format!("{}. {}", i + 1, r.model),
                s.n.to_string(),
                format!("{:.6e}", s.mse),
                format!("{:.6e}", s.rmse),
                format!("{:.6e}", s.mae),
                format!("{:.2}", s.pct_over),
                format!("{:.2}", s.pct_under),
                format!("{:.2}", s.pct_correct),
            ]
        })
        .collect();
    let header = ["model", "n", "mse", "rmse", "mae", "% over", "% under", "% correct"];
    write_text(&out.join(COMPARE_TXT), &text_table(&header, &pretty))?;
    Ok(json!({
        "command": "compare",
        "ranking": ranked.iter().map(|r| json!({ "model": r.model, "mse": r.overall.mse })).collect::<Vec<_>>(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use optlab_core::evaluation::evaluate;
    use optlab_core::market_data::{FeatureRow, MoneynessBands};

    fn report(name: &str, err: f64) -> EvalReport {
        let row = FeatureRow {
            quote_date: chrono::NaiveDate::from_ymd_opt(2024, 1, 2).unwrap(),
            ticker: "SPX".into(),
            s_over_k: 1.0,
            strike: 1.0,
            ttm_years: 0.5,
            rate: 0.01,
            sigma: [0.2; 6],
            target: 0.1,
        };
        evaluate(name, &[0.1 + err], &[row], 0.05, &MoneynessBands::default()).unwrap()
    }

    #[test]
    fn ranking_is_stable_and_ascending() {
        let ranked = rank(vec![report("c", 0.03), report("a", 0.01), report("b", 0.03), report("d", 0.0)]);
        let names: Vec<&str> = ranked.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, ["d", "a", "c", "b"]);
    }
}
