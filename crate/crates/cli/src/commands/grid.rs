use std::path::Path;

use optlab_nn::grid::{grid_search, GridResult};
use serde_json::{json, Value};

use crate::config::GridRun;
use crate::error::Result;
use crate::output::{ensure_dir, write_csv, write_json};
use crate::prepared;

pub const GRID_COLUMNS: [&str; 9] =
    ["rank", "index", "label", "learning_rate", "num_params", "seed", "val_loss", "best_epoch", "error"];
pub const GRID_CSV: &str = "grid.csv";
pub const GRID_JSON: &str = "grid.json";

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn run(cfg: &GridRun, out: &Path) -> Result<Value> {
    let (_, split) = prepared::load(&cfg.data_dir)?;
    let results: Vec<GridResult> = grid_search(&cfg.grid, &cfg.training, |p| {
        let t = p.spec.timesteps;
        let (train, _) = prepared::dataset(&split.train, t, cfg.windowing)?;
        let (val, _) = prepared::dataset(&split.validation, t, cfg.windowing)?;
        Ok((train, val))
    })?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                r.point.index.to_string(),
                r.point.label.clone(),
                r.point.learning_rate.to_string(),
                r.num_params.to_string(),
                r.seed.to_string(),
                opt(&r.val_loss),
                opt(&r.best_epoch),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    ensure_dir(out)?;
    write_csv(&out.join(GRID_CSV), &GRID_COLUMNS, &rows)?;
    write_json(&out.join(GRID_JSON), &results)?;
    let failed = results.iter().filter(|r| r.error.is_some()).count();
    Ok(json!({
        "command": "grid",
        "points": results.len(),
        "failed": failed,
        "best": results.first().map(|r| json!({ "label": r.point.label, "val_loss": r.val_loss })),
    }))
}
