use serde::{Deserialize, Serialize};

use super::features::FeatureRow;
use super::DataError;

pub const MIN_SPLIT_ROWS: usize = 10;

/// Contiguous chronological train/validation/test partition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSplit {
    pub train: Vec<FeatureRow>,
    pub validation: Vec<FeatureRow>,
    pub test: Vec<FeatureRow>,
}

/// Partition sizes: `train = floor(0.70 N)`, `validation = floor(0.15 N)`,
/// test takes the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn for_len(n: usize) -> Result<Self, DataError> {
        if n < MIN_SPLIT_ROWS {
            return Err(DataError::DegenerateSplit(n));
        }
        let train = n * 70 / 100;
        let validation = n * 15 / 100;
        Ok(Self { train, validation, test: n - train - validation })
    }
}

/// Stable-sorts by quote date, then cuts 70/15/15 by row count.
pub fn split_chronological(mut rows: Vec<FeatureRow>) -> Result<DatasetSplit, DataError> {
    let sizes = SplitSizes::for_len(rows.len())?;
    rows.sort_by_key(|r| r.quote_date);
    let test = rows.split_off(sizes.train + sizes.validation);
    let validation = rows.split_off(sizes.train);
    Ok(DatasetSplit { train: rows, validation, test })
}
