use serde::{Deserialize, Serialize};

use super::config::{CoreKind, ModelConfig};
use crate::nn::{init_kan_layer, join, DenseParams, KanLayerParams, Parameters};
use crate::numcore::{Rng, Tensor2};
use crate::preprocess::AdaptiveNormParams;

/// Weights of one branch core.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CoreParams {
    Kan(Vec<KanLayerParams>),
    Linear(DenseParams),
    Mlp(Vec<DenseParams>),
}

impl CoreParams {
    pub fn kind(&self) -> CoreKind {
        match self {
            CoreParams::Kan(_) => CoreKind::Kan,
            CoreParams::Linear(_) => CoreKind::Linear,
            CoreParams::Mlp(_) => CoreKind::Mlp,
        }
    }

    fn build(config: &ModelConfig, kind: CoreKind, rng: Option<&mut Rng>) -> Self {
        let grid = config.grid();
        match (kind, rng) {
            (CoreKind::Kan, Some(rng)) => {
                CoreParams::Kan(config.kan_widths().windows(2).map(|w| init_kan_layer(rng, w[0], w[1], &grid)).collect())
            }
            (CoreKind::Kan, None) => {
                CoreParams::Kan(config.kan_widths().windows(2).map(|w| KanLayerParams::zeros(w[0], w[1], &grid)).collect())
            }
            (CoreKind::Linear, Some(rng)) => CoreParams::Linear(DenseParams::init(rng, config.core_input(), config.horizon)),
            (CoreKind::Linear, None) => CoreParams::Linear(DenseParams::zeros(config.core_input(), config.horizon)),
            (CoreKind::Mlp, Some(rng)) => {
                CoreParams::Mlp(config.mlp_widths().windows(2).map(|w| DenseParams::init(rng, w[0], w[1])).collect())
            }
            (CoreKind::Mlp, None) => {
                CoreParams::Mlp(config.mlp_widths().windows(2).map(|w| DenseParams::zeros(w[0], w[1])).collect())
            }
        }
    }

    /// Makes the core output exactly zero for any input.
    pub fn silence(&mut self) {
        self.visit_mut("", &mut |name, t| {
            if !name.ends_with("spline_scaler") {
                t.fill(0.0)
            }
        });
    }
}

impl Parameters for CoreParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor2)) {
        match self {
            CoreParams::Kan(layers) => {
                for (i, l) in layers.iter().enumerate() {
                    l.visit(&join(prefix, &format!("kan.{i}")), f);
                }
            }
            CoreParams::Linear(d) => d.visit(&join(prefix, "linear"), f),
            CoreParams::Mlp(layers) => {
                for (i, l) in layers.iter().enumerate() {
                    l.visit(&join(prefix, &format!("mlp.{i}")), f);
                }
            }
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor2)) {
        match self {
            CoreParams::Kan(layers) => {
                for (i, l) in layers.iter_mut().enumerate() {
                    l.visit_mut(&join(prefix, &format!("kan.{i}")), f);
                }
            }
            CoreParams::Linear(d) => d.visit_mut(&join(prefix, "linear"), f),
            CoreParams::Mlp(layers) => {
                for (i, l) in layers.iter_mut().enumerate() {
                    l.visit_mut(&join(prefix, &format!("mlp.{i}")), f);
                }
            }
        }
    }
}

/// Patch embedding plus core; one per decomposition component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchParams {
    pub embed: Option<DenseParams>,
    pub core: CoreParams,
}

impl BranchParams {
    fn build(config: &ModelConfig, kind: CoreKind, mut rng: Option<&mut Rng>) -> Self {
        let embed = config.use_patching.then(|| match rng.as_deref_mut() {
            Some(r) => DenseParams::init(r, config.patch_len, config.embed_dim),
            None => DenseParams::zeros(config.patch_len, config.embed_dim),
        });
        Self {
            embed,
            core: CoreParams::build(config, kind, rng),
        }
    }
}

impl Parameters for BranchParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor2)) {
        if let Some(e) = &self.embed {
            e.visit(&join(prefix, "embed"), f);
        }
        self.core.visit(prefix, f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor2)) {
        if let Some(e) = &mut self.embed {
            e.visit_mut(&join(prefix, "embed"), f);
        }
        self.core.visit_mut(prefix, f);
    }
}

/// All trainable weights. Every tensor is shared across channels; the two
/// branches share nothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub adaptive: Option<AdaptiveNormParams>,
    pub trend: Option<BranchParams>,
    pub residual: BranchParams,
}

impl ModelParams {
    /// Random initialization. Each component draws from its own stream of
    /// `rng`, so toggling one component leaves the others' weights unchanged.
    pub fn init(config: &ModelConfig, rng: &Rng) -> Self {
        let adaptive = config.use_adaptive.then(|| AdaptiveNormParams::init(&mut rng.split(0), config.adaptive_dims()));
        let trend = config
            .use_decomposition
            .then(|| BranchParams::build(config, config.trend_core, Some(&mut rng.split(1))));
        let residual = BranchParams::build(config, config.residual_core, Some(&mut rng.split(2)));
        Self {
            adaptive,
            trend,
            residual,
        }
    }

    /// All-zero tensors with the layout of `config` (gradient accumulators,
    /// checkpoint loading).
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            adaptive: config.use_adaptive.then(|| AdaptiveNormParams::zeros(config.adaptive_dims())),
            trend: config.use_decomposition.then(|| BranchParams::build(config, config.trend_core, None)),
            residual: BranchParams::build(config, config.residual_core, None),
        }
    }

    /// Copies every tensor value from `other` (same layout required).
    pub fn copy_from(&mut self, other: &ModelParams) {
        let src = other.named_tensors();
        let mut it = src.into_iter();
        self.visit_mut("", &mut |name, t| {
            let (n, s) = it.next().expect("parameter layouts differ");
            debug_assert_eq!(n, name);
            t.data_mut().copy_from_slice(s.data());
        });
    }
}

impl Parameters for ModelParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor2)) {
        if let Some(a) = &self.adaptive {
            a.visit(&join(prefix, "adaptive"), f);
        }
        if let Some(t) = &self.trend {
            t.visit(&join(prefix, "trend"), f);
        }
        self.residual.visit(&join(prefix, "residual"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor2)) {
        if let Some(a) = &mut self.adaptive {
            a.visit_mut(&join(prefix, "adaptive"), f);
        }
        if let Some(t) = &mut self.trend {
            t.visit_mut(&join(prefix, "trend"), f);
        }
        self.residual.visit_mut(&join(prefix, "residual"), f);
    }
}
