//! Self-verification: finite-difference checks of every analytic gradient,
//! per layer type and through the whole forecaster.

use crate::model::{backward, forward, make_ablation, Ablation, ModelConfig, ModelParams};
use crate::nn::gradcheck::{check_gradients, GradCheckEntry, GradCheckOptions, GradCheckReport};
use crate::nn::{dense_backward, dense_forward, init_kan_layer, kan_backward, kan_forward, DenseParams, GradStore, KanLayerParams, SplineGrid};
use crate::numcore::{rand_normal, rand_uniform, Rng, Tensor2};
use crate::preprocess::{adaptive_denorm, adaptive_denorm_backward, adaptive_forward, adaptive_forward_backward, AdaptiveDims, AdaptiveNormParams};

pub const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    /// Random configurations per component.
    pub configs: usize,
    pub seed: u64,
    /// Perturbs one analytic gradient of the composite model by 1%, as a
    /// negative control for the harness itself.
    pub inject_fault: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            configs: 10,
            seed: 0,
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ComponentReport {
    pub component: &'static str,
    /// Entries are prefixed with the configuration index, `cfg3/weight`.
    pub report: GradCheckReport,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub components: Vec<ComponentReport>,
}

impl SuiteReport {
    pub fn passes(&self) -> bool {
        self.components.iter().all(|c| c.report.passes(GRADCHECK_TOL))
    }

    pub fn worst(&self) -> Option<(&'static str, &GradCheckEntry)> {
        self.components
            .iter()
            .filter_map(|c| c.report.worst().map(|e| (c.component, e)))
            .max_by(|a, b| a.1.max_rel_err.total_cmp(&b.1.max_rel_err))
    }
}

fn probe(y: &Tensor2, r: &Tensor2) -> f64 {
    y.hadamard(r).expect("probe shape").sum()
}

fn dim(rng: &mut Rng, lo: u64, hi: u64) -> usize {
    (lo + rng.below(hi - lo + 1)) as usize
}

fn dense_case(rng: &mut Rng) -> GradCheckReport {
    let (i, o, b) = (dim(rng, 1, 8), dim(rng, 1, 8), dim(rng, 1, 5));
    let p = DenseParams::init(rng, i, o);
    let x = rand_uniform(rng, -2.0, 2.0, b, i).expect("valid range");
    let r = rand_uniform(rng, -1.0, 1.0, b, o).expect("valid range");
    let (_, g) = dense_backward(&x, &p, &r).expect("shapes agree");
    check_gradients(&p, &GradStore::from_params(&g), &GradCheckOptions::default(), |q: &DenseParams| {
        probe(&dense_forward(&x, q).expect("shapes agree"), &r)
    })
}

fn kan_case(rng: &mut Rng) -> GradCheckReport {
    let grid = SplineGrid::new(dim(rng, 3, 8), 3, -1.0, 1.0).expect("valid grid");
    let (i, o, b) = (dim(rng, 1, 6), dim(rng, 1, 6), dim(rng, 1, 4));
    let mut p = init_kan_layer(rng, i, o, &grid);
    p.spline_coef = rand_uniform(rng, -1.0, 1.0, o, i * grid.num_basis()).expect("valid range");
    p.spline_scaler = rand_uniform(rng, 0.5, 1.5, o, i).expect("valid range");
    // inputs reach into the extended knot region on both sides
    let x = rand_uniform(rng, -1.5, 1.5, b, i).expect("valid range");
    let r = rand_uniform(rng, -1.0, 1.0, b, o).expect("valid range");
    let (_, cache) = kan_forward(&x, &p, &grid).expect("shapes agree");
    let (_, g) = kan_backward(&cache, &p, &r).expect("shapes agree");
    check_gradients(&p, &GradStore::from_params(&g), &GradCheckOptions::default(), |q: &KanLayerParams| {
        probe(&kan_forward(&x, q, &grid).expect("shapes agree").0, &r)
    })
}

fn adaptive_case(rng: &mut Rng) -> GradCheckReport {
    let dims = AdaptiveDims {
        lookback: dim(rng, 4, 16),
        hidden: dim(rng, 2, 8),
        stats_dim: dim(rng, 2, 6),
        denorm_hidden: dim(rng, 2, 5),
    };
    let (b, h) = (dim(rng, 1, 4), dim(rng, 1, 6));
    let mut p = AdaptiveNormParams::init(rng, dims);
    // the heads start at zero; randomize them so every path carries gradient
    p.norm_head = DenseParams::init(rng, dims.stats_dim, 2);
    p.denorm_out = DenseParams::init(rng, dims.denorm_hidden, 2);
    let x = rand_uniform(rng, -2.0, 2.0, b, dims.lookback).expect("valid range");
    let y = rand_uniform(rng, -2.0, 2.0, b, h).expect("valid range");
    let r1 = rand_uniform(rng, -1.0, 1.0, b, dims.lookback).expect("valid range");
    let r2 = rand_uniform(rng, -1.0, 1.0, b, h).expect("valid range");
    let (_, c) = adaptive_forward(&x, &p).expect("shapes agree");
    let (_, dc) = adaptive_denorm(&y, c.stats(), &p).expect("shapes agree");
    let mut g = AdaptiveNormParams::zeros(dims);
    let (_, d_stats) = adaptive_denorm_backward(&dc, &p, &r2, &mut g).expect("shapes agree");
    adaptive_forward_backward(&c, &p, &r1, Some(&d_stats), &mut g).expect("shapes agree");
    check_gradients(&p, &GradStore::from_params(&g), &GradCheckOptions::default(), |q: &AdaptiveNormParams| {
        let (xh, c) = adaptive_forward(&x, q).expect("shapes agree");
        let (yh, _) = adaptive_denorm(&y, c.stats(), q).expect("shapes agree");
        probe(&xh, &r1) + probe(&yh, &r2)
    })
}

/// The composite test model: L=32, patch 8, stride 8, H=4, two channels.
pub fn tiny_config() -> ModelConfig {
    let mut c = ModelConfig::new(32, 4, 2);
    c.patch_len = 8;
    c.stride = 8;
    c.embed_dim = 8;
    c.kan_hidden = 8;
    c.mlp_hidden = 8;
    c.stats_hidden = 8;
    c.stats_dim = 4;
    c.denorm_hidden = 4;
    c.ma_kernel = 5;
    c
}

/// Configuration `k` cycles through the full model and every ablation.
fn model_case(rng: &mut Rng, k: usize, fault: bool) -> GradCheckReport {
    let base = tiny_config();
    let config = match k % (Ablation::ALL.len() + 1) {
        0 => base,
        v => make_ablation(&base, Ablation::ALL[v - 1]),
    };
    let mut p = ModelParams::init(&config, rng);
    if let Some(a) = &mut p.adaptive {
        a.norm_head = DenseParams::init(rng, config.stats_dim, 2);
        a.denorm_out = DenseParams::init(rng, config.denorm_hidden, 2);
        a.norm_head.weight.scale_in_place(0.3);
        a.denorm_out.weight.scale_in_place(0.3);
    }
    let x = rand_normal(rng, 0.5, 1.5, config.lookback, config.channels).expect("valid std");
    let r = rand_uniform(rng, -1.0, 1.0, config.horizon, config.channels).expect("valid range");
    let (_, cache) = forward(&x, &p, &config).expect("valid model");
    let mut g = backward(&cache, &p, &r).expect("valid model");
    if fault {
        let t = g.get_mut("residual.embed.weight").expect("patched residual branch");
        t.data_mut()[0] = t.data()[0] * 1.01 + 1e-3;
    }
    check_gradients(&p, &g, &GradCheckOptions::default(), |q: &ModelParams| {
        probe(&forward(&x, q, &config).expect("valid model").0, &r)
    })
}

/// Runs every component on `configs` random configurations.
pub fn gradient_suite(opts: &SuiteOptions) -> SuiteReport {
    type Case = fn(&mut Rng, usize, bool) -> GradCheckReport;
    let cases: [(&'static str, Case); 4] = [
        ("dense", |r, _, _| dense_case(r)),
        ("kan", |r, _, _| kan_case(r)),
        ("adaptive", |r, _, _| adaptive_case(r)),
        ("model", model_case),
    ];
    let root = Rng::new(opts.seed);
    let components = cases
        .iter()
        .enumerate()
        .map(|(ci, (name, case))| {
            let mut report = GradCheckReport::default();
            for k in 0..opts.configs {
                let mut rng = root.split((ci * 1000 + k) as u64);
                let fault = opts.inject_fault && *name == "model" && k == 0;
                report.extend(&format!("cfg{k}/"), case(&mut rng, k, fault));
            }
            ComponentReport { component: name, report }
        })
        .collect();
    SuiteReport { components }
}
