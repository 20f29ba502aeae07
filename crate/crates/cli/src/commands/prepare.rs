use std::path::Path;

use optlab_core::market_data::io::{read_dataset, write_features};
use optlab_core::market_data::{build_features, filter_rows, split_chronological};
use serde_json::{json, Value};

use crate::config::PrepareRun;
use crate::error::Result;
use crate::output::{ensure_dir, write_json};
use crate::prepared::{Manifest, FEATURES_FILE, MANIFEST_FILE};

pub fn run(cfg: &PrepareRun, out: &Path) -> Result<Value> {
    let data = read_dataset(&cfg.data_dir)?;
    let built = build_features(&data.quotes, &data.underlying, &data.rates)?;
    let filtered = filter_rows(built.rows);
    let split = split_chronological(filtered.kept)?;
    let manifest = Manifest::new(data.quotes.len(), built.diagnostics, filtered.dropped, &split);
    ensure_dir(out)?;
    let rows: Vec<_> = [split.train, split.validation, split.test].concat();
    write_features(&out.join(FEATURES_FILE), &rows)?;
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    let s = &manifest.splits;
    Ok(json!({
        "command": "prepare",
        "quotes": manifest.quotes,
        "skipped": manifest.skipped.total(),
        "dropped": manifest.dropped.total(),
        "rows": manifest.rows,
        "train": s.train.rows,
        "validation": s.validation.rows,
        "test": s.test.rows,
    }))
}
