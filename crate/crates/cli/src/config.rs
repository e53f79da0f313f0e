//! Configuration resolution: dataset defaults, then the config file, then
//! command-line flags. The grammar of the file is documented in
//! `docs/config.md`.

use std::path::{Path, PathBuf};

use decompkan::data::{dataset_registry, gen_scenario, read_csv, ScenarioKind, ScenarioSpec, SeriesDataset, SplitConvention};
use decompkan::eval::RunSpec;
use decompkan::model::{CoreKind, ModelConfig};
use decompkan::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Copies every `Some` field of `over` into `self`.
macro_rules! overlay {
    ($self:ident, $over:ident; $($f:ident),* $(,)?) => {
        $( if $over.$f.is_some() { $self.$f = $over.$f.clone(); } )*
    };
}

/// Sets `target.f` for every `Some` field.
macro_rules! apply {
    ($over:ident, $target:ident; $($f:ident),* $(,)?) => {
        $( if let Some(v) = $over.$f.clone() { $target.$f = v; } )*
    };
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataOverrides {
    pub dataset: Option<String>,
    pub path: Option<PathBuf>,
    #[serde(alias = "split")]
    pub convention: Option<String>,
    pub synthetic: Option<String>,
    pub synthetic_seed: Option<u64>,
    pub synthetic_length: Option<usize>,
    pub synthetic_channels: Option<usize>,
}

impl DataOverrides {
    pub fn overlay(&mut self, over: &DataOverrides) {
        overlay!(self, over; dataset, path, convention, synthetic, synthetic_seed, synthetic_length, synthetic_channels);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOverrides {
    pub lookback: Option<usize>,
    pub horizon: Option<usize>,
    pub patch_len: Option<usize>,
    pub stride: Option<usize>,
    pub embed_dim: Option<usize>,
    pub kan_hidden: Option<usize>,
    pub kan_depth: Option<usize>,
    pub grid_size: Option<usize>,
    pub spline_order: Option<usize>,
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
    pub ma_kernel: Option<usize>,
    pub stats_hidden: Option<usize>,
    pub stats_dim: Option<usize>,
    pub denorm_hidden: Option<usize>,
    pub mlp_hidden: Option<usize>,
    pub use_decomposition: Option<bool>,
    pub use_revin: Option<bool>,
    pub use_adaptive: Option<bool>,
    pub use_patching: Option<bool>,
    pub trend_core: Option<CoreKind>,
    pub residual_core: Option<CoreKind>,
}

impl ModelOverrides {
    pub fn overlay(&mut self, over: &ModelOverrides) {
        overlay!(self, over; lookback, horizon, patch_len, stride, embed_dim, kan_hidden, kan_depth, grid_size,
            spline_order, grid_lo, grid_hi, ma_kernel, stats_hidden, stats_dim, denorm_hidden, mlp_hidden,
            use_decomposition, use_revin, use_adaptive, use_patching, trend_core, residual_core);
    }

    pub fn apply(&self, c: &mut ModelConfig) {
        apply!(self, c; lookback, horizon, patch_len, stride, embed_dim, kan_hidden, kan_depth, grid_size,
            spline_order, grid_lo, grid_hi, ma_kernel, stats_hidden, stats_dim, denorm_hidden, mlp_hidden,
            use_decomposition, use_revin, use_adaptive, use_patching, trend_core, residual_core);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub warmup_frac: Option<f64>,
    pub clip_norm: Option<f64>,
    pub bidirectional: Option<bool>,
    pub seed: Option<u64>,
    pub max_batches_per_epoch: Option<usize>,
}

impl TrainOverrides {
    pub fn overlay(&mut self, over: &TrainOverrides) {
        overlay!(self, over; lr, batch_size, max_epochs, patience, warmup_frac, clip_norm, bidirectional, seed,
            max_batches_per_epoch);
    }

    pub fn apply(&self, t: &mut TrainConfig) {
        apply!(self, t; lr, batch_size, max_epochs, patience, warmup_frac, clip_norm, bidirectional, seed);
        if self.max_batches_per_epoch.is_some() {
            t.max_batches_per_epoch = self.max_batches_per_epoch;
        }
    }
}

/// Contents of a config file; every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data: DataOverrides,
    pub model: ModelOverrides,
    pub train: TrainOverrides,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    /// `self` with every value set in `flags` replaced.
    pub fn overlay(mut self, flags: &FileConfig) -> Self {
        self.data.overlay(&flags.data);
        self.model.overlay(&flags.model);
        self.train.overlay(&flags.train);
        self
    }
}

/// A config file as loaded, with the hash of its bytes for the manifest.
#[derive(Clone, Debug)]
pub struct LoadedFile {
    pub path: PathBuf,
    pub sha256: String,
    pub config: FileConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn load_file(path: &Path) -> CliResult<LoadedFile> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
    Ok(LoadedFile {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        config: FileConfig::parse(&text)?,
    })
}

/// Where the series came from, enough to rebuild it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataRef {
    Csv {
        dataset: String,
        path: PathBuf,
        sha256: String,
        convention: SplitConvention,
    },
    Synthetic {
        spec: ScenarioSpec,
    },
}

impl DataRef {
    pub fn dataset(&self) -> String {
        match self {
            DataRef::Csv { dataset, .. } => dataset.clone(),
            DataRef::Synthetic { spec } => format!("synthetic_{}", spec.kind),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedData {
    pub data: DataRef,
    pub dataset: SeriesDataset,
    /// Tuned defaults for this dataset.
    pub lr: f64,
    pub bidirectional: bool,
    pub lookback: usize,
}

pub fn load_data(d: &DataOverrides) -> CliResult<LoadedData> {
    let convention = d.convention.as_deref().map(str::parse::<SplitConvention>).transpose()?;
    if let Some(kind) = &d.synthetic {
        if d.path.is_some() {
            return Err(CliError::Config("give either a data path or a synthetic scenario, not both".into()));
        }
        let kind: ScenarioKind = kind.parse()?;
        let mut spec = ScenarioSpec::new(kind, d.synthetic_seed.unwrap_or(0));
        if let Some(n) = d.synthetic_length {
            spec.length = n;
        }
        if let Some(c) = d.synthetic_channels {
            spec.channels = c;
        }
        let info = dataset_registry(&format!("synthetic_{kind}"), Some(SplitConvention::SEVENTY_TEN_TWENTY))?;
        return Ok(LoadedData {
            dataset: gen_scenario(&spec)?,
            data: DataRef::Synthetic { spec },
            lr: info.lr,
            bidirectional: info.bidirectional,
            lookback: info.lookback,
        });
    }
    let path = d
        .path
        .clone()
        .ok_or_else(|| CliError::Config("no data: give --data <csv> or --synthetic <scenario>".into()))?;
    let name = match &d.dataset {
        Some(n) => n.clone(),
        None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "custom".into()),
    };
    let info = dataset_registry(&name, convention)?;
    let bytes = std::fs::read(&path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let dataset = read_csv(bytes.as_slice(), &info.name, info.convention)?;
    if let Some(c) = info.channels.filter(|&c| c != dataset.channels()) {
        return Err(CliError::Data(format!(
            "{} has {} value columns, {} expects {c}",
            path.display(),
            dataset.channels(),
            info.name
        )));
    }
    Ok(LoadedData {
        data: DataRef::Csv {
            dataset: info.name.clone(),
            path,
            sha256: sha256_hex(&bytes),
            convention: info.convention,
        },
        dataset,
        lr: info.lr,
        bidirectional: info.bidirectional,
        lookback: info.lookback,
    })
}

/// Rebuilds the series a manifest refers to; a CSV whose bytes changed
/// since the run is a data error.
pub fn reload(data: &DataRef) -> CliResult<SeriesDataset> {
    match data {
        DataRef::Synthetic { spec } => Ok(gen_scenario(spec)?),
        DataRef::Csv {
            dataset,
            path,
            sha256,
            convention,
        } => {
            let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
            if sha256_hex(&bytes) != *sha256 {
                return Err(CliError::Data(format!("{} changed since the run that produced it", path.display())));
            }
            Ok(read_csv(bytes.as_slice(), dataset, *convention)?)
        }
    }
}

/// A fully resolved training setup.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub spec: RunSpec,
    pub data: DataRef,
    pub dataset: SeriesDataset,
    pub file: Option<LoadedFile>,
}

/// Dataset defaults (tuned lr, bidirectional flag, lookback; horizon 96),
/// then the config file, then flags.
pub fn resolve(file: Option<&Path>, flags: &FileConfig) -> CliResult<Resolved> {
    let loaded = file.map(load_file).transpose()?;
    let merged = match &loaded {
        Some(f) => f.config.clone().overlay(flags),
        None => flags.clone(),
    };
    let data = load_data(&merged.data)?;
    let mut model = ModelConfig::new(data.lookback, 96, data.dataset.channels());
    merged.model.apply(&mut model);
    model.validate()?;
    let mut train = TrainConfig {
        lr: data.lr,
        bidirectional: data.bidirectional,
        ..TrainConfig::default()
    };
    merged.train.apply(&mut train);
    train.validate()?;
    Ok(Resolved {
        spec: RunSpec {
            dataset: data.data.dataset(),
            model,
            train,
        },
        data: data.data,
        dataset: data.dataset,
        file: loaded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_grammar() {
        let f = FileConfig::parse(
            r#"
            [data]
            synthetic = "trending"
            synthetic_length = 800

            [model]
            lookback = 96
            trend_core = "mlp"
            use_revin = false

            [train]
            lr = 3e-3
            max_batches_per_epoch = 4
            "#,
        )
        .unwrap();
        assert_eq!(f.model.trend_core, Some(CoreKind::Mlp));
        assert_eq!(f.train.lr, Some(3e-3));
        assert!(FileConfig::parse("[model]\nlookbak = 3").is_err());
        assert!(FileConfig::parse("[unknown]\nx = 1").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let file = FileConfig::parse("[model]\nlookback = 96\nhorizon = 24\n[train]\nlr = 0.01\nseed = 5").unwrap();
        let mut flags = FileConfig::default();
        flags.model.horizon = Some(48);
        flags.train.seed = Some(9);
        let m = file.overlay(&flags);
        assert_eq!((m.model.lookback, m.model.horizon), (Some(96), Some(48)));
        assert_eq!((m.train.lr, m.train.seed), (Some(0.01), Some(9)));
    }

    #[test]
    fn synthetic_resolution_uses_custom_defaults() {
        let mut flags = FileConfig::default();
        flags.data.synthetic = Some("periodic".into());
        flags.model.lookback = Some(96);
        let r = resolve(None, &flags).unwrap();
        assert_eq!(r.spec.model.horizon, 96);
        assert_eq!(r.spec.model.channels, 3);
        assert_eq!(r.spec.train.lr, 1e-3);
        assert!(r.spec.train.bidirectional);
        assert_eq!(r.spec.dataset, "synthetic_periodic");
    }

    #[test]
    fn missing_csv_is_a_data_error() {
        let mut flags = FileConfig::default();
        flags.data.dataset = Some("weather".into());
        flags.data.path = Some("/nonexistent/weather.csv".into());
        assert_eq!(resolve(None, &flags).unwrap_err().exit_code(), 2);
        flags.data.path = None;
        assert_eq!(resolve(None, &flags).unwrap_err().exit_code(), 1);
    }
}
