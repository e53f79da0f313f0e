//! The full forecasting pipeline in row layout (one series per row) and its
//! exact backward pass.

use super::config::ModelConfig;
use super::params::{BranchParams, CoreParams, ModelParams};
use crate::error::{Error, Result};
use crate::nn::{dense_backward, dense_forward, kan_backward, kan_forward, DenseParams, GradStore, KanCache, SplineGrid};
use crate::numcore::{gelu, gelu_deriv, Tensor2};
use crate::preprocess::{
    adaptive_denorm, adaptive_denorm_backward, adaptive_forward, adaptive_forward_backward, decompose,
    moving_average_transpose, patch_embed, patch_embed_backward, revin_denormalize_rows, revin_normalize_rows,
    AdaptiveCache, DenormCache, PatchCache, RevinState, REVIN_EPS,
};

#[derive(Clone, Debug)]
enum CoreCache {
    Kan(Vec<KanCache>),
    Linear(Tensor2),
    /// Inputs of every dense layer and the pre-activations of the hidden ones.
    Mlp { inputs: Vec<Tensor2>, pre: Vec<Tensor2> },
}

#[derive(Clone, Debug)]
struct BranchCache {
    patch: Option<PatchCache>,
    core: CoreCache,
}

/// Everything [`backward`] needs from a forward call.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    rows: usize,
    /// `Some(C)` when the forward call took an `L × C` window.
    window_channels: Option<usize>,
    config: ModelConfig,
    revin: RevinState,
    adaptive: Option<AdaptiveCache>,
    denorm: Option<DenormCache>,
    trend: Option<BranchCache>,
    residual: BranchCache,
}

impl ForwardCache {
    pub fn revin(&self) -> &RevinState {
        &self.revin
    }
}

fn check_finite(t: &Tensor2, stage: &str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { stage: stage.to_string() })
    }
}

fn core_forward(x: &Tensor2, core: &CoreParams, grid: &SplineGrid) -> Result<(Tensor2, CoreCache)> {
    match core {
        CoreParams::Kan(layers) => {
            let mut h = x.clone();
            let mut caches = Vec::with_capacity(layers.len());
            for layer in layers {
                let (next, c) = kan_forward(&h, layer, grid)?;
                caches.push(c);
                h = next;
            }
            Ok((h, CoreCache::Kan(caches)))
        }
        CoreParams::Linear(d) => Ok((dense_forward(x, d)?, CoreCache::Linear(x.clone()))),
        CoreParams::Mlp(layers) => {
            let mut inputs = Vec::with_capacity(layers.len());
            let mut pre = Vec::with_capacity(layers.len() - 1);
            let mut h = x.clone();
            for (i, layer) in layers.iter().enumerate() {
                let z = dense_forward(&h, layer)?;
                inputs.push(h);
                if i + 1 < layers.len() {
                    h = z.map(gelu);
                    pre.push(z);
                } else {
                    h = z;
                }
            }
            Ok((h, CoreCache::Mlp { inputs, pre }))
        }
    }
}

/// Returns the gradient w.r.t. the core input; parameter gradients are
/// accumulated into `grads`.
fn core_backward(cache: &CoreCache, core: &CoreParams, upstream: &Tensor2, grads: &mut CoreParams) -> Result<Tensor2> {
    match (cache, core, grads) {
        (CoreCache::Kan(caches), CoreParams::Kan(layers), CoreParams::Kan(g)) => {
            let mut d = upstream.clone();
            for i in (0..layers.len()).rev() {
                let (d_in, lg) = kan_backward(&caches[i], &layers[i], &d)?;
                g[i].base_weight.add_assign(&lg.base_weight)?;
                g[i].spline_coef.add_assign(&lg.spline_coef)?;
                g[i].spline_scaler.add_assign(&lg.spline_scaler)?;
                d = d_in;
            }
            Ok(d)
        }
        (CoreCache::Linear(x), CoreParams::Linear(d), CoreParams::Linear(g)) => {
            let (d_in, lg) = dense_backward(x, d, upstream)?;
            accumulate(g, &lg)?;
            Ok(d_in)
        }
        (CoreCache::Mlp { inputs, pre }, CoreParams::Mlp(layers), CoreParams::Mlp(g)) => {
            let mut d = upstream.clone();
            for i in (0..layers.len()).rev() {
                if i + 1 < layers.len() {
                    for (v, z) in d.data_mut().iter_mut().zip(pre[i].data()) {
                        *v *= gelu_deriv(*z);
                    }
                }
                let (d_in, lg) = dense_backward(&inputs[i], &layers[i], &d)?;
                accumulate(&mut g[i], &lg)?;
                d = d_in;
            }
            Ok(d)
        }
        _ => Err(Error::config("forward cache does not match the model's core type")),
    }
}

fn accumulate(into: &mut DenseParams, g: &DenseParams) -> Result<()> {
    into.weight.add_assign(&g.weight)?;
    into.bias.add_assign(&g.bias)?;
    Ok(())
}

fn branch_forward(x: &Tensor2, branch: &BranchParams, config: &ModelConfig, name: &str) -> Result<(Tensor2, BranchCache)> {
    let (input, patch) = match (&branch.embed, config.patch_spec()) {
        (Some(embed), Some(spec)) => {
            let (e, c) = patch_embed(x, &spec, embed)?;
            check_finite(&e, &format!("{name}.embed"))?;
            (e, Some(c))
        }
        (None, None) => (x.clone(), None),
        _ => return Err(Error::config("patch embedding does not match the configuration")),
    };
    let (y, core) = core_forward(&input, &branch.core, &config.grid())?;
    check_finite(&y, &format!("{name}.core"))?;
    Ok((y, BranchCache { patch, core }))
}

fn branch_backward(
    cache: &BranchCache,
    branch: &BranchParams,
    config: &ModelConfig,
    upstream: &Tensor2,
    grads: &mut BranchParams,
) -> Result<Tensor2> {
    let d_input = core_backward(&cache.core, &branch.core, upstream, &mut grads.core)?;
    match (&cache.patch, &branch.embed, &mut grads.embed, config.patch_spec()) {
        (Some(pc), Some(embed), Some(g), Some(spec)) => {
            let (d_series, eg) = patch_embed_backward(pc, &spec, embed, &d_input)?;
            accumulate(g, &eg)?;
            Ok(d_series)
        }
        (None, None, None, None) => Ok(d_input),
        _ => Err(Error::config("forward cache does not match the model's patching")),
    }
}

fn check_layout(params: &ModelParams, config: &ModelConfig) -> Result<()> {
    if params.adaptive.is_some() != config.use_adaptive || params.trend.is_some() != config.use_decomposition {
        return Err(Error::config("parameters were built for a different component configuration"));
    }
    if params.residual.core.kind() != config.residual_core
        || params.trend.as_ref().is_some_and(|t| t.core.kind() != config.trend_core)
    {
        return Err(Error::config("parameters were built for a different core type"));
    }
    Ok(())
}

/// Forecasts every row of `x` (`R × L`, one series per row) as `R × H`.
///
/// Stages: RevIN → adaptive normalization → moving-average decomposition →
/// per-branch patch embedding and core → sum → adaptive denormalization →
/// RevIN denormalization. Disabled stages are skipped (identity); without
/// decomposition the whole normalized signal goes through the residual
/// branch.
pub fn forward_rows(x: &Tensor2, params: &ModelParams, config: &ModelConfig) -> Result<(Tensor2, ForwardCache)> {
    check_layout(params, config)?;
    if x.cols() != config.lookback {
        return Err(Error::Shape(crate::numcore::ShapeError::new(
            "forward",
            format!("window length {} but the model expects L={}", x.cols(), config.lookback),
        )));
    }
    check_finite(x, "input")?;
    let rows = x.rows();

    let (xn, revin) = if config.use_revin {
        let (xn, st) = revin_normalize_rows(x, REVIN_EPS)?;
        check_finite(&xn, "revin_normalize")?;
        (xn, st)
    } else {
        (x.clone(), RevinState::identity(rows))
    };

    let (xa, adaptive) = match &params.adaptive {
        Some(ap) => {
            let (xa, c) = adaptive_forward(&xn, ap)?;
            check_finite(&xa, "adaptive_forward")?;
            (xa, Some(c))
        }
        None => (xn, None),
    };

    let (mut y, trend, residual) = match &params.trend {
        Some(tp) => {
            let (t, r) = decompose(&xa, config.ma_kernel)?;
            let (yt, tc) = branch_forward(&t, tp, config, "trend")?;
            let (yr, rc) = branch_forward(&r, &params.residual, config, "residual")?;
            (yt.add(&yr)?, Some(tc), rc)
        }
        None => {
            let (yr, rc) = branch_forward(&xa, &params.residual, config, "residual")?;
            (yr, None, rc)
        }
    };

    let denorm = match (&params.adaptive, &adaptive) {
        (Some(ap), Some(ac)) => {
            let (yd, dc) = adaptive_denorm(&y, ac.stats(), ap)?;
            check_finite(&yd, "adaptive_denorm")?;
            y = yd;
            Some(dc)
        }
        _ => None,
    };

    if config.use_revin {
        y = revin_denormalize_rows(&y, &revin)?;
        check_finite(&y, "revin_denormalize")?;
    }

    Ok((
        y,
        ForwardCache {
            rows,
            window_channels: None,
            config: config.clone(),
            revin,
            adaptive,
            denorm,
            trend,
            residual,
        },
    ))
}

/// Forecasts one `L × C` window as `H × C`. Channels are folded into the
/// batch, so every channel passes through the same weights independently.
pub fn forward(x: &Tensor2, params: &ModelParams, config: &ModelConfig) -> Result<(Tensor2, ForwardCache)> {
    if x.cols() != config.channels {
        return Err(Error::Shape(crate::numcore::ShapeError::new(
            "forward",
            format!("window has {} channels but the model expects C={}", x.cols(), config.channels),
        )));
    }
    let (y, mut cache) = forward_rows(&x.transpose(), params, config)?;
    cache.window_channels = Some(x.cols());
    Ok((y.transpose(), cache))
}

/// Forecast only, no cache.
pub fn predict_rows(x: &Tensor2, params: &ModelParams, config: &ModelConfig) -> Result<Tensor2> {
    Ok(forward_rows(x, params, config)?.0)
}

/// Exact parameter gradients for the forward call that produced `cache`.
/// `d_y` has the layout of that call's output. RevIN statistics are
/// treated as constants of the window.
pub fn backward(cache: &ForwardCache, params: &ModelParams, d_y: &Tensor2) -> Result<GradStore> {
    let config = &cache.config;
    check_layout(params, config)?;
    let d_rows = match cache.window_channels {
        Some(_) => d_y.transpose(),
        None => d_y.clone(),
    };
    if d_rows.shape() != (cache.rows, config.horizon) {
        return Err(Error::Shape(crate::numcore::ShapeError::new(
            "backward",
            format!("upstream {:?} for a forward over {} series of horizon {}", d_y.shape(), cache.rows, config.horizon),
        )));
    }
    let mut grads = ModelParams::zeros(config);

    let mut d = d_rows;
    if config.use_revin {
        for r in 0..cache.rows {
            let s = cache.revin.sigma[r];
            d.row_mut(r).iter_mut().for_each(|v| *v *= s);
        }
    }

    let mut d_stats = None;
    if let (Some(ap), Some(dc), Some(ga)) = (&params.adaptive, &cache.denorm, &mut grads.adaptive) {
        let (d_sum, ds) = adaptive_denorm_backward(dc, ap, &d, ga)?;
        d = d_sum;
        d_stats = Some(ds);
    }

    let d_r = branch_backward(&cache.residual, &params.residual, config, &d, &mut grads.residual)?;
    let d_xa = match (&cache.trend, &params.trend, &mut grads.trend) {
        (Some(tc), Some(tp), Some(gt)) => {
            let d_t = branch_backward(tc, tp, config, &d, gt)?;
            // r = x − MA(x), t = MA(x)
            let through_ma = moving_average_transpose(&d_t.sub(&d_r)?, config.ma_kernel)?;
            d_r.add(&through_ma)?
        }
        (None, None, None) => d_r,
        _ => return Err(Error::config("forward cache does not match the model's decomposition")),
    };

    if let (Some(ap), Some(ac), Some(ga)) = (&params.adaptive, &cache.adaptive, &mut grads.adaptive) {
        adaptive_forward_backward(ac, ap, &d_xa, d_stats.as_ref(), ga)?;
    }

    Ok(GradStore::from_params(&grads))
}
