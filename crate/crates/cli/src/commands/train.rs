use std::path::Path;

use optlab_core::evaluation::error_metrics;
use optlab_nn::{train, Model, ModelSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{self, TrainRun, Windowing};
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, write_json, write_text};
use crate::prepared;

pub const CHECKPOINT_FILE: &str = "model.bin";
pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.csv";

/// Everything besides the weights needed to rebuild a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedModel {
    pub name: String,
    pub spec: ModelSpec,
    pub windowing: Windowing,
    pub seed: u64,
    pub num_params: usize,
}

impl TrainedModel {
    pub fn load(dir: &Path) -> Result<(Self, Model)> {
        let meta: Self = config::load(&dir.join(MODEL_FILE))?;
        let model = Model::load(meta.spec.clone(), &dir.join(CHECKPOINT_FILE))?;
        Ok((meta, model))
    }
}

pub fn run(cfg: &TrainRun, out: &Path) -> Result<Value> {
    let (_, split) = prepared::load(&cfg.data_dir)?;
    let t = cfg.model.timesteps;
    let (train_set, _) = prepared::dataset(&split.train, t, cfg.windowing)?;
    let (val_set, _) = prepared::dataset(&split.validation, t, cfg.windowing)?;
    let mut model = Model::new(cfg.model.clone(), cfg.training.seed)?;
    let history = train(&mut model, &train_set, &val_set, &cfg.training)?;

    ensure_dir(out)?;
    model.save(&out.join(CHECKPOINT_FILE))?;
    let meta = TrainedModel {
        name: cfg.name.clone(),
        spec: cfg.model.clone(),
        windowing: cfg.windowing,
        seed: cfg.training.seed,
        num_params: model.num_params(),
    };
    write_json(&out.join(MODEL_FILE), &meta)?;
    write_text(&out.join(HISTORY_FILE), &history.to_csv())?;

    let pred = model.predict(&val_set.x)?;
    let val = error_metrics(&pred, &val_set.y)?;
    if !(val.mse.is_finite()) {
        return Err(CliError::Format {
            path: out.join(CHECKPOINT_FILE),
            message: "validation error is not finite".into(),
        });
    }
    Ok(json!({
        "command": "train",
        "model": cfg.name,
        "num_params": meta.num_params,
        "epochs_completed": history.records.len(),
        "best_epoch": history.best_epoch,
        "stopped_early": history.stopped_early,
        "val": val,
    }))
}
