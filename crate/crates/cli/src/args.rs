use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use decompkan::model::CoreKind;

use crate::config::{DataOverrides, FileConfig, ModelOverrides, TrainOverrides};

#[derive(Debug, Parser)]
#[command(name = "decompkan", version, about = "Decomposition-based KAN forecaster")]
pub struct Cli {
    /// Root of the run directories [env: DECOMPKAN_OUT_DIR] [default: runs]
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and evaluate it on validation and test
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split
    Eval(EvalArgs),
    /// Train over several seeds and report mean ± std of test MSE
    Seeds(SeedsArgs),
    /// Learning rate × bidirectional × lookback grid
    Grid(GridArgs),
    /// Component ablations against the full model
    Ablate(AblateArgs),
    /// Win-rate experiments on synthetic signals
    Synth(SynthArgs),
    /// Plot the most active learned edge functions
    Inspect(InspectArgs),
    /// Finite-difference check of every analytic gradient
    Gradcheck(GradcheckArgs),
    /// Closed-form versus enumerated parameter count
    Params(ParamsArgs),
}

fn on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on or off, got `{s}`")),
    }
}

fn core(s: &str) -> Result<CoreKind, String> {
    s.parse().map_err(|e: decompkan::Error| e.to_string())
}

/// Where the series comes from.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Known dataset name (weather, etth1, …); selects split and tuned defaults
    #[arg(long)]
    pub dataset: Option<String>,
    /// CSV file: a timestamp column, then one numeric column per channel
    #[arg(long = "data", value_name = "CSV")]
    pub path: Option<PathBuf>,
    /// Split convention: ett_hourly, ett_minute, 70/10/20 or ratio:<train>,<test>
    #[arg(long = "convention", value_name = "CONVENTION")]
    pub convention: Option<String>,
    /// Generated scenario instead of a CSV: periodic, trending, reversing, sawtooth
    #[arg(long, value_name = "SCENARIO")]
    pub synthetic: Option<String>,
    #[arg(long)]
    pub synthetic_seed: Option<u64>,
    #[arg(long)]
    pub synthetic_length: Option<usize>,
    #[arg(long)]
    pub synthetic_channels: Option<usize>,
}

impl DataArgs {
    pub fn overrides(&self) -> DataOverrides {
        DataOverrides {
            dataset: self.dataset.clone(),
            path: self.path.clone(),
            convention: self.convention.clone(),
            synthetic: self.synthetic.clone(),
            synthetic_seed: self.synthetic_seed,
            synthetic_length: self.synthetic_length,
            synthetic_channels: self.synthetic_channels,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.overrides() == DataOverrides::default()
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub patch_len: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub kan_hidden: Option<usize>,
    #[arg(long)]
    pub kan_depth: Option<usize>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub spline_order: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub grid_hi: Option<f64>,
    #[arg(long)]
    pub ma_kernel: Option<usize>,
    #[arg(long)]
    pub stats_hidden: Option<usize>,
    #[arg(long)]
    pub stats_dim: Option<usize>,
    #[arg(long)]
    pub denorm_hidden: Option<usize>,
    #[arg(long)]
    pub mlp_hidden: Option<usize>,
    #[arg(long, value_parser = on_off, value_name = "on|off")]
    pub decomposition: Option<bool>,
    #[arg(long, value_parser = on_off, value_name = "on|off")]
    pub revin: Option<bool>,
    #[arg(long, value_parser = on_off, value_name = "on|off")]
    pub adaptive: Option<bool>,
    #[arg(long, value_parser = on_off, value_name = "on|off")]
    pub patching: Option<bool>,
    #[arg(long, value_parser = core, value_name = "kan|linear|mlp")]
    pub trend_core: Option<CoreKind>,
    #[arg(long, value_parser = core, value_name = "kan|linear|mlp")]
    pub residual_core: Option<CoreKind>,
}

impl ModelArgs {
    pub fn overrides(&self) -> ModelOverrides {
        ModelOverrides {
            lookback: self.lookback,
            horizon: self.horizon,
            patch_len: self.patch_len,
            stride: self.stride,
            embed_dim: self.embed_dim,
            kan_hidden: self.kan_hidden,
            kan_depth: self.kan_depth,
            grid_size: self.grid_size,
            spline_order: self.spline_order,
            grid_lo: self.grid_lo,
            grid_hi: self.grid_hi,
            ma_kernel: self.ma_kernel,
            stats_hidden: self.stats_hidden,
            stats_dim: self.stats_dim,
            denorm_hidden: self.denorm_hidden,
            mlp_hidden: self.mlp_hidden,
            use_decomposition: self.decomposition,
            use_revin: self.revin,
            use_adaptive: self.adaptive,
            use_patching: self.patching,
            trend_core: self.trend_core,
            residual_core: self.residual_core,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long = "epochs")]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub warmup_frac: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long, value_parser = on_off, value_name = "on|off")]
    pub bidirectional: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random subset of mini-batches per epoch instead of the full pass
    #[arg(long = "max-batches")]
    pub max_batches_per_epoch: Option<usize>,
}

impl TrainFlags {
    pub fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            warmup_frac: self.warmup_frac,
            clip_norm: self.clip_norm,
            bidirectional: self.bidirectional,
            seed: self.seed,
            max_batches_per_epoch: self.max_batches_per_epoch,
        }
    }
}

/// Config file plus flag overrides, shared by every training command.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML config file; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainFlags,
}

impl RunArgs {
    pub fn flags(&self) -> FileConfig {
        FileConfig {
            data: self.data.overrides(),
            model: self.model.overrides(),
            train: self.train.overrides(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`; the sibling manifest.json supplies the data
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Evaluate on other data than the training run's
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct SeedsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of seeds: the base seed, base + 1, …
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Explicit seed list; overrides --n
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [2e-4, 5e-4, 1e-3])]
    pub lrs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [336, 512])]
    pub lookbacks: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Training seed defaults to 42 here
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated subset of full, no_decomp, no_adaptive, no_revin,
    /// core_linear, core_mlp, no_bidirectional
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<String>>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// 1: periodic and trend, 2: hybrid, 3: capacity sweep over k
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub step: u8,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// First signal seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub kan_hidden: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long = "max-batches")]
    pub max_batches: Option<usize>,
    /// k values of the step-3 sweep
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Trend,
    Residual,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Svg,
    Csv,
    Both,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Edges per branch, ranked by activation range
    #[arg(long, default_value_t = 8)]
    pub top: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub branch: BranchArg,
    /// KAN layer index within the branch
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Random configurations per component
    #[arg(long, default_value_t = 10)]
    pub configs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corrupt one analytic gradient to confirm the check fails
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[arg(long = "L", alias = "lookback")]
    pub lookback: usize,
    #[arg(long = "H", alias = "horizon")]
    pub horizon: usize,
    #[arg(long, default_value_t = 7)]
    pub channels: usize,
}
