//! One JSON file per command. Unknown keys are rejected and relative paths
//! resolve against the config file's directory.

use std::path::{Path, PathBuf};

use optlab_core::evaluation::DEFAULT_MARGIN;
use optlab_core::market_data::{MoneynessBands, SynthConfig};
use optlab_core::vol::VOL_WINDOWS;
use optlab_nn::grid::GridSpec;
use optlab_nn::{ModelSpec, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Windowing {
    /// Target is the row after the window.
    #[default]
    Causal,
    /// Target is the window's last row.
    Overlapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRun {
    pub seed: u64,
    pub dataset: SynthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareRun {
    /// Directory holding quotes.csv, underlying.csv and rates.csv.
    pub data_dir: PathBuf,
}

fn default_model_name() -> String {
    "model".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRun {
    #[serde(default = "default_model_name")]
    pub name: String,
    /// Output directory of `prepare`.
    pub data_dir: PathBuf,
    pub model: ModelSpec,
    pub training: TrainConfig,
    #[serde(default)]
    pub windowing: Windowing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRef {
    /// Output directory of `train`.
    pub dir: PathBuf,
    /// Overrides the name stored with the model.
    #[serde(default)]
    pub name: Option<String>,
}

fn default_windows() -> Vec<usize> {
    VOL_WINDOWS.to_vec()
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRun {
    pub data_dir: PathBuf,
    #[serde(default)]
    pub models: Vec<ModelRef>,
    /// Realized-vol windows priced by the closed-form baseline.
    #[serde(default = "default_windows")]
    pub bs_windows: Vec<usize>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default)]
    pub bands: MoneynessBands,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRun {
    /// Report JSON files written by `evaluate`.
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRun {
    pub data_dir: PathBuf,
    pub grid: GridSpec,
    /// Shared by every point; the learning rate comes from the grid.
    pub training: TrainConfig,
    #[serde(default)]
    pub windowing: Windowing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McRun {
    pub paths: u64,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
}

/// Prices from `vol`, or recovers the implied vol from `price`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsRun {
    pub spot: Option<f64>,
    pub strike: Option<f64>,
    pub rate: Option<f64>,
    pub ttm: Option<f64>,
    pub vol: Option<f64>,
    pub price: Option<f64>,
    pub mc: Option<McRun>,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })
}

pub fn resolve(config: &Path, p: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

/// Names end up in file names, so keep them to `[A-Za-z0-9_.-]`.
pub fn check_name(name: &str) -> std::result::Result<(), String> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(format!("name `{name}` must be non-empty [A-Za-z0-9_.-] and not start with '.'"))
    }
}

impl TrainRun {
    pub fn validate(&self) -> std::result::Result<(), String> {
        check_name(&self.name)?;
        self.model.validate().map_err(|e| e.to_string())?;
        self.training.validate().map_err(|e| e.to_string())
    }
}

impl EvaluateRun {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Some(w) = self.bs_windows.iter().find(|w| !VOL_WINDOWS.contains(w)) {
            return Err(format!("bs_windows: {w} is not one of {VOL_WINDOWS:?}"));
        }
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return Err("margin must lie in (0, 1)".into());
        }
        let b = &self.bands;
        if !(b.lower < b.atm_low && b.atm_low <= b.atm_high && b.atm_high < b.upper) {
            return Err("bands must satisfy lower < atm_low <= atm_high < upper".into());
        }
        for m in &self.models {
            if let Some(n) = &m.name {
                check_name(n)?;
            }
        }
        Ok(())
    }
}

impl CompareRun {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.reports.len() < 2 {
            return Err(format!("compare needs at least 2 reports, got {}", self.reports.len()));
        }
        Ok(())
    }
}

impl GridRun {
    pub fn validate(&self) -> std::result::Result<(), String> {
        self.grid.points().map_err(|e| e.to_string())?;
        self.training.validate().map_err(|e| e.to_string())
    }
}
