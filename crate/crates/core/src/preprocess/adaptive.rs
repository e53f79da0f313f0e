//! Learned scale/shift applied after RevIN, with a separately
//! parameterized head for the output side.
//!
//! ```text
//! stats  = Dense(d_s <- hidden)(GELU(Dense(hidden <- L)(x̃)))
//! (δs, δb)   = norm_head(stats)                     x̂ = (1 + δs)·x̃ + δb
//! (δs', δb') = Dense(2 <- 8)(GELU(Dense(8 <- d_s)(stats)))   y = (1 + δs')·y' + δb'
//! ```
//!
//! The last layer of each head starts at zero, so both transforms begin as
//! the identity.

use serde::{Deserialize, Serialize};

use crate::nn::{dense_backward, dense_forward, join, DenseParams, Parameters};
use crate::numcore::{gelu, gelu_deriv, Rng, ShapeError, Tensor2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveNormParams {
    pub stats_in: DenseParams,
    pub stats_out: DenseParams,
    pub norm_head: DenseParams,
    pub denorm_hidden: DenseParams,
    pub denorm_out: DenseParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptiveDims {
    pub lookback: usize,
    pub hidden: usize,
    pub stats_dim: usize,
    pub denorm_hidden: usize,
}

impl AdaptiveDims {
    pub fn standard(lookback: usize) -> Self {
        Self {
            lookback,
            hidden: 32,
            stats_dim: 8,
            denorm_hidden: 8,
        }
    }

    pub fn param_count(&self) -> usize {
        DenseParams::param_count(self.lookback, self.hidden)
            + DenseParams::param_count(self.hidden, self.stats_dim)
            + DenseParams::param_count(self.stats_dim, 2)
            + DenseParams::param_count(self.stats_dim, self.denorm_hidden)
            + DenseParams::param_count(self.denorm_hidden, 2)
    }
}

impl AdaptiveNormParams {
    pub fn init(rng: &mut Rng, dims: AdaptiveDims) -> Self {
        Self {
            stats_in: DenseParams::init(rng, dims.lookback, dims.hidden),
            stats_out: DenseParams::init(rng, dims.hidden, dims.stats_dim),
            norm_head: DenseParams::zeros(dims.stats_dim, 2),
            denorm_hidden: DenseParams::init(rng, dims.stats_dim, dims.denorm_hidden),
            denorm_out: DenseParams::zeros(dims.denorm_hidden, 2),
        }
    }

    pub fn zeros(dims: AdaptiveDims) -> Self {
        Self {
            stats_in: DenseParams::zeros(dims.lookback, dims.hidden),
            stats_out: DenseParams::zeros(dims.hidden, dims.stats_dim),
            norm_head: DenseParams::zeros(dims.stats_dim, 2),
            denorm_hidden: DenseParams::zeros(dims.stats_dim, dims.denorm_hidden),
            denorm_out: DenseParams::zeros(dims.denorm_hidden, 2),
        }
    }

    pub fn lookback(&self) -> usize {
        self.stats_in.in_dim()
    }

    pub fn stats_dim(&self) -> usize {
        self.stats_out.out_dim()
    }

    /// Puts the normalization head back at the identity.
    pub fn reset_norm_head(&mut self) {
        self.norm_head.weight.fill(0.0);
        self.norm_head.bias.fill(0.0);
    }
}

impl Parameters for AdaptiveNormParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor2)) {
        self.stats_in.visit(&join(prefix, "stats_in"), f);
        self.stats_out.visit(&join(prefix, "stats_out"), f);
        self.norm_head.visit(&join(prefix, "norm_head"), f);
        self.denorm_hidden.visit(&join(prefix, "denorm_hidden"), f);
        self.denorm_out.visit(&join(prefix, "denorm_out"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor2)) {
        self.stats_in.visit_mut(&join(prefix, "stats_in"), f);
        self.stats_out.visit_mut(&join(prefix, "stats_out"), f);
        self.norm_head.visit_mut(&join(prefix, "norm_head"), f);
        self.denorm_hidden.visit_mut(&join(prefix, "denorm_hidden"), f);
        self.denorm_out.visit_mut(&join(prefix, "denorm_out"), f);
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveCache {
    x_norm: Tensor2,
    pre_gelu: Tensor2,
    hidden: Tensor2,
    stats: Tensor2,
    /// `rows × 2`: `(δs, δb)` per series
    head: Tensor2,
}

impl AdaptiveCache {
    pub fn stats(&self) -> &Tensor2 {
        &self.stats
    }

    /// Per-series `(s, b)`.
    pub fn scale_shift(&self, row: usize) -> (f64, f64) {
        (1.0 + self.head.get(row, 0), self.head.get(row, 1))
    }
}

#[derive(Clone, Debug)]
pub struct DenormCache {
    y: Tensor2,
    stats: Tensor2,
    pre_gelu: Tensor2,
    hidden: Tensor2,
    head: Tensor2,
}

/// Row-wise `s·x + b` with `(δs, δb)` taken from `head`.
fn apply_affine(x: &Tensor2, head: &Tensor2) -> Tensor2 {
    let mut out = x.clone();
    for r in 0..x.rows() {
        let (s, b) = (1.0 + head.get(r, 0), head.get(r, 1));
        for v in out.row_mut(r) {
            *v = s * *v + b;
        }
    }
    out
}

/// Gradient of `s·x + b` w.r.t. `(δs, δb)` and `x`.
fn affine_backward(x: &Tensor2, head: &Tensor2, upstream: &Tensor2) -> (Tensor2, Tensor2) {
    let mut d_head = Tensor2::zeros(x.rows(), 2);
    let mut d_x = upstream.clone();
    for r in 0..x.rows() {
        let g = upstream.row(r);
        let ds: f64 = g.iter().zip(x.row(r)).map(|(a, b)| a * b).sum();
        let db: f64 = g.iter().sum();
        d_head.set(r, 0, ds);
        d_head.set(r, 1, db);
        let s = 1.0 + head.get(r, 0);
        d_x.row_mut(r).iter_mut().for_each(|v| *v *= s);
    }
    (d_head, d_x)
}

/// `x_norm` holds one RevIN-normalized series per row.
pub fn adaptive_forward(x_norm: &Tensor2, params: &AdaptiveNormParams) -> Result<(Tensor2, AdaptiveCache), ShapeError> {
    if x_norm.cols() != params.lookback() {
        return Err(ShapeError::new(
            "adaptive_forward",
            format!("series length {} but the module was built for {}", x_norm.cols(), params.lookback()),
        ));
    }
    let pre_gelu = dense_forward(x_norm, &params.stats_in)?;
    let hidden = pre_gelu.map(gelu);
    let stats = dense_forward(&hidden, &params.stats_out)?;
    let head = dense_forward(&stats, &params.norm_head)?;
    let out = apply_affine(x_norm, &head);
    Ok((
        out,
        AdaptiveCache {
            x_norm: x_norm.clone(),
            pre_gelu,
            hidden,
            stats,
            head,
        },
    ))
}

/// `y` holds one forecast per row; `stats` comes from the same rows'
/// [`adaptive_forward`].
pub fn adaptive_denorm(y: &Tensor2, stats: &Tensor2, params: &AdaptiveNormParams) -> Result<(Tensor2, DenormCache), ShapeError> {
    if stats.rows() != y.rows() || stats.cols() != params.stats_dim() {
        return Err(ShapeError::new(
            "adaptive_denorm",
            format!("forecast {:?} with stats {:?}", y.shape(), stats.shape()),
        ));
    }
    let pre_gelu = dense_forward(stats, &params.denorm_hidden)?;
    let hidden = pre_gelu.map(gelu);
    let head = dense_forward(&hidden, &params.denorm_out)?;
    let out = apply_affine(y, &head);
    Ok((
        out,
        DenormCache {
            y: y.clone(),
            stats: stats.clone(),
            pre_gelu,
            hidden,
            head,
        },
    ))
}

fn gelu_backward(pre: &Tensor2, upstream: &Tensor2) -> Tensor2 {
    let mut g = upstream.clone();
    for (v, p) in g.data_mut().iter_mut().zip(pre.data()) {
        *v *= gelu_deriv(*p);
    }
    g
}

/// Returns `(d_y, d_stats)` and accumulates the denorm-head gradients into `grads`.
pub fn adaptive_denorm_backward(
    cache: &DenormCache,
    params: &AdaptiveNormParams,
    upstream: &Tensor2,
    grads: &mut AdaptiveNormParams,
) -> Result<(Tensor2, Tensor2), ShapeError> {
    cache.y.require_same_shape(upstream, "adaptive_denorm_backward")?;
    let (d_head, d_y) = affine_backward(&cache.y, &cache.head, upstream);
    let (d_hidden, g_out) = dense_backward(&cache.hidden, &params.denorm_out, &d_head)?;
    let d_pre = gelu_backward(&cache.pre_gelu, &d_hidden);
    let (d_stats, g_hidden) = dense_backward(&cache.stats, &params.denorm_hidden, &d_pre)?;
    accumulate(&mut grads.denorm_out, &g_out)?;
    accumulate(&mut grads.denorm_hidden, &g_hidden)?;
    Ok((d_y, d_stats))
}

/// Backward through [`adaptive_forward`]. `d_stats_extra` carries the
/// gradient reaching the stats vector from the denorm head. Returns the
/// gradient w.r.t. the normalized input and accumulates parameter
/// gradients into `grads`.
pub fn adaptive_forward_backward(
    cache: &AdaptiveCache,
    params: &AdaptiveNormParams,
    upstream: &Tensor2,
    d_stats_extra: Option<&Tensor2>,
    grads: &mut AdaptiveNormParams,
) -> Result<Tensor2, ShapeError> {
    cache.x_norm.require_same_shape(upstream, "adaptive_forward_backward")?;
    let (d_head, mut d_x) = affine_backward(&cache.x_norm, &cache.head, upstream);
    let (mut d_stats, g_norm) = dense_backward(&cache.stats, &params.norm_head, &d_head)?;
    if let Some(extra) = d_stats_extra {
        d_stats.add_assign(extra)?;
    }
    let (d_hidden, g_stats_out) = dense_backward(&cache.hidden, &params.stats_out, &d_stats)?;
    let d_pre = gelu_backward(&cache.pre_gelu, &d_hidden);
    let (d_x_stats, g_stats_in) = dense_backward(&cache.x_norm, &params.stats_in, &d_pre)?;
    d_x.add_assign(&d_x_stats)?;
    accumulate(&mut grads.norm_head, &g_norm)?;
    accumulate(&mut grads.stats_out, &g_stats_out)?;
    accumulate(&mut grads.stats_in, &g_stats_in)?;
    Ok(d_x)
}

fn accumulate(into: &mut DenseParams, g: &DenseParams) -> Result<(), ShapeError> {
    into.weight.add_assign(&g.weight)?;
    into.bias.add_assign(&g.bias)
}
