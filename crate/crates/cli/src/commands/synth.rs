use std::path::Path;

use optlab_core::market_data::generate_synthetic_dataset;
use optlab_core::market_data::io::{write_dataset, QUOTES_FILE, RATES_FILE, UNDERLYING_FILE};
use serde_json::{json, Value};

use crate::config::SynthRun;
use crate::error::{CliError, Result};
use crate::output::ensure_dir;

pub fn run(cfg: &SynthRun, out: &Path) -> Result<Value> {
    cfg.dataset.validate()?;
    let data = generate_synthetic_dataset(&cfg.dataset, cfg.seed)?;
    ensure_dir(out)?;
    write_dataset(out, &data)?;
    if data.quotes.len() != cfg.dataset.expected_quotes() {
        return Err(CliError::Format {
            path: out.join(QUOTES_FILE),
            message: format!("wrote {} quotes, config implies {}", data.quotes.len(), cfg.dataset.expected_quotes()),
        });
    }
    Ok(json!({
        "command": "synth",
        "seed": cfg.seed,
        "quotes": data.quotes.len(),
        "files": [QUOTES_FILE, UNDERLYING_FILE, RATES_FILE],
    }))
}
