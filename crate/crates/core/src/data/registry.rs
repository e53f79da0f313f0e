use serde::{Deserialize, Serialize};

use super::dataset::SplitConvention;
use crate::error::{Error, Result};

/// Split convention, channel count and tuned defaults of a known dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub convention: SplitConvention,
    /// `None` for `custom`.
    pub channels: Option<usize>,
    pub lr: f64,
    pub bidirectional: bool,
    pub lookback: usize,
}

const TABLE: &[(&str, usize, f64, bool, usize)] = &[
    ("Weather", 21, 1e-3, true, 336),
    ("Solar", 137, 2e-4, true, 336),
    ("ECL", 321, 5e-4, true, 512),
    ("Traffic", 862, 5e-4, true, 336),
    ("ETTh1", 7, 2e-4, true, 336),
    ("ETTh2", 7, 1e-3, true, 336),
    ("ETTm1", 7, 2e-4, true, 512),
    ("ETTm2", 7, 1e-3, false, 336),
    ("PPG-DaLiA", 15, 5e-4, false, 336),
];

fn normalize(name: &str) -> String {
    name.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase()
}

/// Looks up `name` (case, `-` and `_` insensitive). `custom` and unknown
/// names need an explicit split convention; they get the most common tuned
/// defaults (lr 1e-3, bidirectional on, L=336).
pub fn dataset_registry(name: &str, convention: Option<SplitConvention>) -> Result<DatasetInfo> {
    let key = normalize(name);
    if let Some(&(canonical, channels, lr, bidirectional, lookback)) = TABLE.iter().find(|row| normalize(row.0) == key) {
        let default = match key.as_str() {
            "etth1" | "etth2" => SplitConvention::ETT_HOURLY,
            "ettm1" | "ettm2" => SplitConvention::ETT_MINUTE,
            _ => SplitConvention::SEVENTY_TEN_TWENTY,
        };
        return Ok(DatasetInfo {
            name: canonical.to_string(),
            convention: convention.unwrap_or(default),
            channels: Some(channels),
            lr,
            bidirectional,
            lookback,
        });
    }
    match convention {
        Some(convention) => Ok(DatasetInfo {
            name: if key.is_empty() { "custom".into() } else { name.to_string() },
            convention,
            channels: None,
            lr: 1e-3,
            bidirectional: true,
            lookback: 336,
        }),
        None => Err(Error::config(format!(
            "unknown dataset `{name}`; give an explicit split convention or one of: {}",
            TABLE.iter().map(|r| r.0).collect::<Vec<_>>().join(", ")
        ))),
    }
}

pub fn known_datasets() -> impl Iterator<Item = &'static str> {
    TABLE.iter().map(|r| r.0)
}
