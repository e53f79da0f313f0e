use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{DenseParams, KanLayerParams, SplineGrid};
use crate::preprocess::{AdaptiveDims, PatchSpec};

/// Forecasting core of a branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreKind {
    /// KAN layers of widths `[in, hidden × depth, H]`
    Kan,
    /// One dense `in → H`
    Linear,
    /// Dense `in → hidden → GELU → … → H`
    Mlp,
}

impl fmt::Display for CoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoreKind::Kan => "kan",
            CoreKind::Linear => "linear",
            CoreKind::Mlp => "mlp",
        })
    }
}

impl FromStr for CoreKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kan" => Ok(CoreKind::Kan),
            "linear" => Ok(CoreKind::Linear),
            "mlp" => Ok(CoreKind::Mlp),
            other => Err(Error::config(format!("unknown core `{other}` (kan, linear, mlp)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub channels: usize,
    pub patch_len: usize,
    pub stride: usize,
    pub embed_dim: usize,
    pub kan_hidden: usize,
    pub kan_depth: usize,
    pub grid_size: usize,
    pub spline_order: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub ma_kernel: usize,
    pub stats_hidden: usize,
    pub stats_dim: usize,
    pub denorm_hidden: usize,
    /// Hidden width of the `mlp` core.
    pub mlp_hidden: usize,
    pub use_decomposition: bool,
    pub use_revin: bool,
    pub use_adaptive: bool,
    pub use_patching: bool,
    pub trend_core: CoreKind,
    pub residual_core: CoreKind,
}

impl ModelConfig {
    /// The fixed architecture: P=16, S=8, d=32, KAN hidden 64 × 2, G=5,
    /// cubic splines on [-1, 1], K_MA=25, adaptive stats 32 → 8.
    pub fn new(lookback: usize, horizon: usize, channels: usize) -> Self {
        Self {
            lookback,
            horizon,
            channels,
            patch_len: 16,
            stride: 8,
            embed_dim: 32,
            kan_hidden: 64,
            kan_depth: 2,
            grid_size: 5,
            spline_order: 3,
            grid_lo: -1.0,
            grid_hi: 1.0,
            ma_kernel: 25,
            stats_hidden: 32,
            stats_dim: 8,
            denorm_hidden: 8,
            mlp_hidden: 64,
            use_decomposition: true,
            use_revin: true,
            use_adaptive: true,
            use_patching: true,
            trend_core: CoreKind::Kan,
            residual_core: CoreKind::Kan,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback < 2 || self.horizon == 0 || self.channels == 0 {
            return Err(Error::config(format!(
                "lookback {} / horizon {} / channels {} must be positive (lookback ≥ 2)",
                self.lookback, self.horizon, self.channels
            )));
        }
        if self.use_patching {
            PatchSpec::new(self.patch_len, self.stride, self.embed_dim, self.lookback)?;
        }
        if self.ma_kernel == 0 || self.ma_kernel.is_multiple_of(2) {
            return Err(Error::config(format!("ma_kernel must be odd, got {}", self.ma_kernel)));
        }
        if self.kan_hidden == 0 || self.mlp_hidden == 0 {
            return Err(Error::config("hidden widths must be positive"));
        }
        if self.use_adaptive && (self.stats_hidden == 0 || self.stats_dim == 0 || self.denorm_hidden == 0) {
            return Err(Error::config("adaptive module widths must be positive"));
        }
        SplineGrid::new(self.grid_size, self.spline_order, self.grid_lo, self.grid_hi)?;
        Ok(())
    }

    pub fn grid(&self) -> SplineGrid {
        SplineGrid::new(self.grid_size, self.spline_order, self.grid_lo, self.grid_hi).expect("validated grid")
    }

    pub fn patch_spec(&self) -> Option<PatchSpec> {
        self.use_patching
            .then(|| PatchSpec::new(self.patch_len, self.stride, self.embed_dim, self.lookback).expect("validated patch spec"))
    }

    pub fn adaptive_dims(&self) -> AdaptiveDims {
        AdaptiveDims {
            lookback: self.lookback,
            hidden: self.stats_hidden,
            stats_dim: self.stats_dim,
            denorm_hidden: self.denorm_hidden,
        }
    }

    /// Input width of each branch core: `N·d` with patching, `L` without.
    pub fn core_input(&self) -> usize {
        self.patch_spec().map_or(self.lookback, |s| s.flat_len())
    }

    pub fn kan_widths(&self) -> Vec<usize> {
        self.layer_widths(self.kan_hidden)
    }

    pub fn mlp_widths(&self) -> Vec<usize> {
        self.layer_widths(self.mlp_hidden)
    }

    fn layer_widths(&self, hidden: usize) -> Vec<usize> {
        let mut w = vec![self.core_input()];
        w.extend(std::iter::repeat_n(hidden, self.kan_depth));
        w.push(self.horizon);
        w
    }

    pub fn core_param_count(&self, core: CoreKind) -> usize {
        match core {
            CoreKind::Kan => {
                let grid = self.grid();
                self.kan_widths().windows(2).map(|w| KanLayerParams::param_count(w[0], w[1], &grid)).sum()
            }
            CoreKind::Linear => DenseParams::param_count(self.core_input(), self.horizon),
            CoreKind::Mlp => self.mlp_widths().windows(2).map(|w| DenseParams::param_count(w[0], w[1])).sum(),
        }
    }

    pub fn branch_param_count(&self, core: CoreKind) -> usize {
        let embed = if self.use_patching {
            DenseParams::param_count(self.patch_len, self.embed_dim)
        } else {
            0
        };
        embed + self.core_param_count(core)
    }

    /// Short human-readable description used in tables.
    pub fn describe(&self) -> String {
        format!(
            "L={} H={} core={}/{} decomp={} revin={} adaptive={} patch={}",
            self.lookback,
            self.horizon,
            self.trend_core,
            self.residual_core,
            self.use_decomposition,
            self.use_revin,
            self.use_adaptive,
            self.use_patching
        )
    }
}

/// Closed-form parameter count of a configuration.
///
/// For the standard architecture this is
/// `2·[(P·d + d) + (G+p+2)·(N·d·64 + 64·64 + 64·H)] + adaptive`.
pub fn count_params(config: &ModelConfig) -> usize {
    let mut total = config.branch_param_count(config.residual_core);
    if config.use_decomposition {
        total += config.branch_param_count(config.trend_core);
    }
    if config.use_adaptive {
        total += config.adaptive_dims().param_count();
    }
    total
}

/// One row of the component ablation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    NoDecomp,
    NoAdaptive,
    NoRevin,
    CoreLinear,
    CoreMlp,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Ablation::NoDecomp,
        Ablation::NoAdaptive,
        Ablation::NoRevin,
        Ablation::CoreLinear,
        Ablation::CoreMlp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Ablation::NoDecomp => "no_decomp",
            Ablation::NoAdaptive => "no_adaptive",
            Ablation::NoRevin => "no_revin",
            Ablation::CoreLinear => "core_linear",
            Ablation::CoreMlp => "core_mlp",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown ablation variant `{s}`")))
    }
}

/// Returns `config` with one component removed or replaced.
///
/// `no_decomp` routes the whole signal through the residual branch only;
/// `no_revin` keeps the adaptive stage, which then sees the raw window.
pub fn make_ablation(config: &ModelConfig, variant: Ablation) -> ModelConfig {
    let mut c = config.clone();
    match variant {
        Ablation::NoDecomp => c.use_decomposition = false,
        Ablation::NoAdaptive => c.use_adaptive = false,
        Ablation::NoRevin => c.use_revin = false,
        Ablation::CoreLinear => {
            c.trend_core = CoreKind::Linear;
            c.residual_core = CoreKind::Linear;
        }
        Ablation::CoreMlp => {
            c.trend_core = CoreKind::Mlp;
            c.residual_core = CoreKind::Mlp;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parameter_counts() {
        assert_eq!(count_params(&ModelConfig::new(336, 96, 7)), 1_896_404);
        assert_eq!(count_params(&ModelConfig::new(336, 720, 7)), 2_695_124);
        assert_eq!(count_params(&ModelConfig::new(512, 96, 7)), 2_803_156);
        assert_eq!(count_params(&ModelConfig::new(512, 720, 7)), 3_601_876);
    }

    #[test]
    fn closed_form_matches_written_formula() {
        for l in [336usize, 512] {
            for h in [96usize, 192, 336, 720] {
                let n = (l - 16) / 8 + 1;
                let nd = n * 32;
                let branch = (16 * 32 + 32) + 10 * (nd * 64 + 64 * 64 + 64 * h);
                let adaptive = (l * 32 + 32) + (32 * 8 + 8) + (8 * 2 + 2) + (8 * 8 + 8) + (8 * 2 + 2);
                assert_eq!(count_params(&ModelConfig::new(l, h, 1)), 2 * branch + adaptive);
            }
        }
    }

    #[test]
    fn ablation_counts() {
        let base = ModelConfig::new(336, 96, 7);
        let branch = base.branch_param_count(CoreKind::Kan);
        let adaptive = base.adaptive_dims().param_count();
        assert_eq!(count_params(&make_ablation(&base, Ablation::NoDecomp)), branch + adaptive);
        let lin = make_ablation(&base, Ablation::CoreLinear);
        assert_eq!(lin.core_param_count(CoreKind::Linear), 1312 * 96 + 96);
        assert_eq!(count_params(&make_ablation(&base, Ablation::NoAdaptive)), 2 * branch);
        let mlp = make_ablation(&base, Ablation::CoreMlp);
        assert_eq!(mlp.core_param_count(CoreKind::Mlp), 1312 * 64 + 64 + 64 * 64 + 64 + 64 * 96 + 96);
        assert!("no_attention".parse::<Ablation>().is_err());
        assert_eq!("no_revin".parse::<Ablation>().unwrap(), Ablation::NoRevin);
    }

    #[test]
    fn layer_widths() {
        let c = ModelConfig::new(336, 96, 1);
        assert_eq!(c.kan_widths(), vec![1312, 64, 64, 96]);
        let mut raw = c.clone();
        raw.use_patching = false;
        assert_eq!(raw.kan_widths(), vec![336, 64, 64, 96]);
    }

    #[test]
    fn validation() {
        let mut c = ModelConfig::new(336, 96, 1);
        assert!(c.validate().is_ok());
        c.ma_kernel = 24;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::new(8, 4, 1);
        assert!(c.validate().is_err());
        c.use_patching = false;
        assert!(c.validate().is_ok());
    }
}
