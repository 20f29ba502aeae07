mod common;

use std::fs;
use std::path::Path;

use common::{kan_layers, mlp_layers, ok, optlab, read_csv, synth_config, write_config};
use optlab_cli::commands::compare::COMPARE_COLUMNS;
use optlab_cli::commands::evaluate::{PAIR_COLUMNS, REPORT_COLUMNS};
use optlab_cli::prepared::Manifest;
use serde_json::{json, Value};
use tempfile::TempDir;

/// 2 tickers x 30 days x 8 strikes x 5 expiries.
fn prepared(noise: f64) -> TempDir {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let synth = write_config(p, "synth.json", &synth_config(3, 2, 30, noise, 65));
    ok(p, &["synth", "--config", &synth, "--out", "raw"]);
    let prep = write_config(p, "prepare.json", &json!({ "data_dir": "raw" }));
    ok(p, &["prepare", "--config", &prep, "--out", "prepared"]);
    dir
}

fn train_mlp(p: &Path, name: &str, epochs: usize, extra: &[&str]) -> Value {
    let cfg = json!({
        "name": name,
        "data_dir": "prepared",
        "model": { "layers": mlp_layers(8, 2) },
        "training": { "epochs": epochs, "batch_size": 32, "seed": 5, "shuffle": true },
    });
    let file = write_config(p, &format!("{name}.json"), &cfg);
    let out = format!("models/{name}");
    let mut args = vec!["train", "--config", &file, "--out", &out];
    args.extend_from_slice(extra);
    ok(p, &args)
}

fn load_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn synth_is_reproducible_and_sized() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let cfg = write_config(p, "synth.json", &synth_config(3, 2, 30, 0.01, 65));
    let s = ok(p, &["synth", "--config", &cfg, "--out", "a"]);
    assert_eq!(s["quotes"], 2 * 30 * 8 * 5);
    ok(p, &["synth", "--config", &cfg, "--out", "b"]);
    ok(p, &["synth", "--config", &cfg, "--seed", "4", "--out", "c"]);
    for file in ["quotes.csv", "underlying.csv", "rates.csv"] {
        assert_eq!(fs::read(p.join("a").join(file)).unwrap(), fs::read(p.join("b").join(file)).unwrap(), "{file}");
    }
    assert_eq!(read_csv(&p.join("a/quotes.csv")).1.len(), 2400);
    assert_ne!(fs::read(p.join("a/quotes.csv")).unwrap(), fs::read(p.join("c/quotes.csv")).unwrap());
}

#[test]
fn prepare_manifest_accounts_for_every_quote() {
    let dir = prepared(0.01);
    let p = dir.path();
    let m: Manifest = serde_json::from_value(load_json(&p.join("prepared/manifest.json"))).unwrap();
    assert_eq!(m.quotes, 2400);
    assert_eq!(m.quotes, m.rows + m.skipped.total() + m.dropped.total());
    let s = &m.splits;
    assert_eq!(s.train.rows + s.validation.rows + s.test.rows, m.rows);
    assert_eq!((s.train.end, s.validation.end, s.test.end), (s.validation.start, s.test.start, m.rows));

    let (header, rows) = read_csv(&p.join("prepared/features.csv"));
    let ticker = header.iter().position(|h| h == "ticker").unwrap();
    assert_eq!(rows.len(), m.rows);
    let pct_total: f64 = m.tickers.values().map(|t| t.pct_rows).sum();
    assert!((pct_total - 100.0).abs() < 1e-9);
    for (name, share) in &m.tickers {
        let count = rows.iter().filter(|r| &r[ticker] == name).count();
        assert_eq!(count, share.rows);
        assert_eq!(share.train + share.validation + share.test, share.rows);
        assert!((share.pct_rows - 100.0 * count as f64 / rows.len() as f64).abs() < 1e-12);
    }

    ok(p, &["prepare", "--config", "prepare.json", "--out", "again"]);
    for file in ["features.csv", "manifest.json"] {
        assert_eq!(fs::read(p.join("prepared").join(file)).unwrap(), fs::read(p.join("again").join(file)).unwrap());
    }
}

#[test]
fn noiseless_data_is_priced_exactly_by_the_matching_window() {
    let dir = prepared(0.0);
    let p = dir.path();
    let cfg = write_config(p, "eval.json", &json!({ "data_dir": "prepared", "bs_windows": [65, 20] }));
    ok(p, &["evaluate", "--config", &cfg, "--out", "eval"]);
    let exact = load_json(&p.join("eval/bs_sigma_65.report.json"));
    assert!(exact["mse"].as_f64().unwrap() < 1e-20, "{}", exact["mse"]);
    let off = load_json(&p.join("eval/bs_sigma_20.report.json"));
    assert!(off["mse"].as_f64().unwrap() > 1e-12);
}

#[test]
fn train_writes_one_history_row_per_epoch() {
    let dir = prepared(0.01);
    let p = dir.path();
    let s = train_mlp(p, "mlp", 4, &[]);
    assert_eq!(s["epochs_completed"], 4);
    assert_eq!(s["num_params"], 10 * 8 + 8 + 8 * 8 + 8 + 8 + 1);
    let val = &s["val"];
    assert_eq!(val["rmse"].as_f64().unwrap(), val["mse"].as_f64().unwrap().sqrt());
    let (header, rows) = read_csv(&p.join("models/mlp/history.csv"));
    assert_eq!(header, ["epoch", "train_loss", "val_loss"]);
    assert_eq!(rows.len(), 4);
    assert!(p.join("models/mlp/model.bin").exists());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = prepared(0.01);
    let p = dir.path();
    train_mlp(p, "one", 3, &["--jobs", "1"]);
    fs::rename(p.join("models/one"), p.join("models/single")).unwrap();
    train_mlp(p, "one", 3, &["--jobs", "3"]);
    for file in ["model.bin", "model.json", "history.csv"] {
        let a = fs::read(p.join("models/single").join(file)).unwrap();
        assert_eq!(a, fs::read(p.join("models/one").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn divergence_exits_nonzero() {
    let dir = prepared(0.01);
    let p = dir.path();
    let cfg = json!({
        "data_dir": "prepared",
        "model": { "layers": mlp_layers(8, 1) },
        "training": { "epochs": 3, "seed": 1, "learning_rate": 1e300 },
    });
    let file = write_config(p, "boom.json", &cfg);
    let o = optlab(p, &["train", "--config", &file, "--out", "boom"]);
    assert_eq!(o.code, 3, "{}", o.stderr);
    assert!(o.stderr.contains("diverged"), "{}", o.stderr);
}

#[test]
fn evaluate_writes_consistent_reports() {
    let dir = prepared(0.01);
    let p = dir.path();
    train_mlp(p, "mlp", 2, &[]);
    let cfg = json!({ "data_dir": "prepared", "models": [{ "dir": "models/mlp" }], "bs_windows": [30, 65, 90] });
    let file = write_config(p, "eval.json", &cfg);
    let s = ok(p, &["evaluate", "--config", &file, "--out", "eval"]);
    let test_rows = s["test_rows"].as_u64().unwrap() as usize;

    for name in ["mlp", "bs_sigma_30", "bs_sigma_65", "bs_sigma_90"] {
        let report = load_json(&p.join(format!("eval/{name}.report.json")));
        assert_eq!(report["rmse"].as_f64().unwrap(), report["mse"].as_f64().unwrap().sqrt());
        let (header, rows) = read_csv(&p.join(format!("eval/{name}.report.csv")));
        assert_eq!(header, REPORT_COLUMNS);
        assert_eq!(rows[0][1..3], ["overall", "all"]);
        for r in &rows {
            assert!((f(&r[10]) + f(&r[11]) + f(&r[12]) - 100.0).abs() < 1e-9, "{r:?}");
            assert_eq!(f(&r[5]), f(&r[4]).sqrt());
        }
        for slice in ["ticker", "moneyness"] {
            let n: usize = rows.iter().filter(|r| r[1] == slice).map(|r| r[3].parse::<usize>().unwrap()).sum();
            assert_eq!(n, test_rows, "{name} {slice}");
        }
        let (header, pairs) = read_csv(&p.join(format!("eval/{name}.pairs.csv")));
        assert_eq!(header, PAIR_COLUMNS);
        assert_eq!(pairs.len(), test_rows);
    }

    let (header, table) = read_csv(&p.join("eval/bs_windows.csv"));
    assert_eq!(header, ["window", "mse", "rmse", "mae"]);
    let windows: Vec<&str> = table.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(windows, ["20", "30", "40", "50", "65", "90"]);
    assert!(fs::read_to_string(p.join("eval/bs_windows.txt")).unwrap().contains("sigma_65"));
}

#[test]
fn evaluate_rejects_a_spec_that_does_not_fit_the_checkpoint() {
    let dir = prepared(0.01);
    let p = dir.path();
    train_mlp(p, "mlp", 1, &[]);
    let meta_path = p.join("models/mlp/model.json");
    let mut meta = load_json(&meta_path);
    meta["spec"]["layers"][0]["units"] = json!(9);
    fs::write(&meta_path, meta.to_string()).unwrap();
    let file = write_config(p, "eval.json", &json!({ "data_dir": "prepared", "models": [{ "dir": "models/mlp" }] }));
    let o = optlab(p, &["evaluate", "--config", &file, "--out", "eval"]);
    assert_ne!(o.code, 0);
    assert!(o.stderr.contains("checkpoint"), "{}", o.stderr);
}

#[test]
fn sequence_models_evaluate_on_their_windows() {
    let dir = prepared(0.01);
    let p = dir.path();
    let cfg = json!({
        "name": "gru",
        "data_dir": "prepared",
        "model": { "timesteps": 4, "layers": [{ "kind": "gru", "units": 6, "attention": true }] },
        "training": { "epochs": 1, "batch_size": 64, "seed": 2 },
    });
    let file = write_config(p, "gru.json", &cfg);
    ok(p, &["train", "--config", &file, "--out", "models/gru"]);
    let file = write_config(
        p,
        "eval.json",
        &json!({ "data_dir": "prepared", "models": [{ "dir": "models/gru" }], "bs_windows": [] }),
    );
    let s = ok(p, &["evaluate", "--config", &file, "--out", "eval"]);
    let test_rows = s["test_rows"].as_u64().unwrap() as usize;
    assert_eq!(read_csv(&p.join("eval/gru.pairs.csv")).1.len(), test_rows - 4);
}

#[test]
fn compare_ranks_by_mse() {
    let dir = prepared(0.01);
    let p = dir.path();
    train_mlp(p, "mlp", 2, &[]);
    let cfg = json!({ "data_dir": "prepared", "models": [{ "dir": "models/mlp" }], "bs_windows": [20, 65, 90] });
    let file = write_config(p, "eval.json", &cfg);
    ok(p, &["evaluate", "--config", &file, "--out", "eval"]);
    let reports = [
        "eval/bs_sigma_20.report.json",
        "eval/mlp.report.json",
        "eval/bs_sigma_65.report.json",
        "eval/bs_sigma_90.report.json",
    ];
    let file = write_config(p, "cmp.json", &json!({ "reports": reports }));
    ok(p, &["compare", "--config", &file, "--out", "cmp"]);
    let (header, rows) = read_csv(&p.join("cmp/comparison.csv"));
    assert_eq!(header, COMPARE_COLUMNS);
    let mut models: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    let mse: Vec<f64> = rows.iter().map(|r| f(&r[3])).collect();
    assert!(mse.windows(2).all(|w| w[0] <= w[1]), "{mse:?}");
    assert_eq!(rows.iter().map(|r| r[0].clone()).collect::<Vec<_>>(), ["1", "2", "3", "4"]);
    models.sort();
    assert_eq!(models, ["bs_sigma_20", "bs_sigma_65", "bs_sigma_90", "mlp"]);
    assert!(fs::read_to_string(p.join("cmp/comparison.txt")).unwrap().contains("1. bs_sigma_65"));

    let file = write_config(p, "one.json", &json!({ "reports": [reports[0]] }));
    assert_eq!(optlab(p, &["compare", "--config", &file, "--out", "cmp"]).code, 2);

    let mut old = load_json(&p.join(reports[1]));
    old["schema"] = json!(99);
    fs::write(p.join("old.json"), old.to_string()).unwrap();
    let file = write_config(p, "mixed.json", &json!({ "reports": [reports[0], "old.json"] }));
    let o = optlab(p, &["compare", "--config", &file, "--out", "cmp"]);
    assert_ne!(o.code, 0);
    assert!(o.stderr.contains("schema"), "{}", o.stderr);
}

#[test]
fn grid_writes_a_ranked_table() {
    let dir = prepared(0.01);
    let p = dir.path();
    let cfg = json!({
        "data_dir": "prepared",
        "grid": { "family": "kan", "widths": [4], "degrees": [[1], [2]], "kan_families": ["legendre"], "dropouts": [0.0], "learning_rates": [0.01] },
        "training": { "epochs": 2, "batch_size": 64, "seed": 9 },
    });
    let file = write_config(p, "grid.json", &cfg);
    let s = ok(p, &["grid", "--config", &file, "--out", "grid"]);
    assert_eq!(s["points"], 2);
    let (header, rows) = read_csv(&p.join("grid/grid.csv"));
    assert_eq!(header[..3], ["rank", "index", "label"]);
    assert_eq!(rows.len(), 2);
    assert!(f(&rows[0][6]) <= f(&rows[1][6]));
    let again = ok(p, &["grid", "--config", &file, "--out", "grid2"]);
    assert_eq!(s, again);
    assert_eq!(fs::read(p.join("grid/grid.csv")).unwrap(), fs::read(p.join("grid2/grid.csv")).unwrap());
}

#[test]
fn reference_configs_train() {
    let dir = prepared(0.01);
    let p = dir.path();
    let cfg = json!({
        "name": "kan",
        "data_dir": "prepared",
        "model": { "layers": kan_layers(64, &[2, 5, 4], 0.09) },
        "training": { "epochs": 1, "batch_size": 64, "seed": 1 },
    });
    let file = write_config(p, "kan.json", &cfg);
    let s = ok(p, &["train", "--config", &file, "--out", "models/kan"]);
    assert_eq!(s["num_params"], 70593);
    let cfg = json!({
        "data_dir": "prepared",
        "model": { "layers": mlp_layers(64, 3) },
        "training": { "epochs": 1, "seed": 1 },
    });
    let file = write_config(p, "mlp.json", &cfg);
    assert_eq!(ok(p, &["train", "--config", &file, "--out", "models/mlp"])["num_params"], 9089);
}

#[test]
fn bs_prices_and_inverts() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let args = ["bs", "--spot", "100", "--strike", "100", "--rate", "0.05", "--ttm", "1"];
    let s = ok(p, &[&args[..], &["--vol", "0.2"]].concat());
    let price = s["price"].as_f64().unwrap();
    assert!((price - 10.450583572185565).abs() < 1e-10, "{price}");
    assert!((s["lognormal_assembly"].as_f64().unwrap() - price).abs() < 1e-10);

    let iv = ok(p, &[&args[..], &["--price", &price.to_string()]].concat());
    assert!((iv["implied_vol"].as_f64().unwrap() - 0.2).abs() < 1e-8);

    let mc = ok(p, &[&args[..], &["--vol", "0.2", "--paths", "200000", "--seed", "3"]].concat());
    let (m, se) = (mc["mc"]["price"].as_f64().unwrap(), mc["mc"]["std_error"].as_f64().unwrap());
    assert!((m - price).abs() < 4.0 * se, "{m} {se}");

    assert_eq!(optlab(p, &[&args[..], &["--vol", "0.2", "--paths", "10"]].concat()).code, 2);
    assert_eq!(optlab(p, &args).code, 2);
    assert_ne!(optlab(p, &[&args[..], &["--price", "500"]].concat()).code, 0);
}

#[test]
fn config_errors_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let file = write_config(p, "prep.json", &json!({ "data_dir": "raw", "typo": 1 }));
    let o = optlab(p, &["prepare", "--config", &file, "--out", "x"]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("typo"), "{}", o.stderr);
    assert_eq!(optlab(p, &["prepare", "--out", "x"]).code, 2);
    assert_eq!(optlab(p, &["prepare", "--config", &file, "--jobs", "0", "--out", "x"]).code, 2);
    let o = optlab(p, &["prepare", "--config", "missing.json", "--out", "x"]);
    assert_eq!(o.code, 1);
    let file = write_config(p, "prep.json", &json!({ "data_dir": "raw" }));
    let o = optlab(p, &["prepare", "--config", &file, "--out", "x"]);
    assert_ne!(o.code, 0);
    assert!(o.stderr.contains("quotes.csv"), "{}", o.stderr);
}
