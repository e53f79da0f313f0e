use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{GradStore, Parameters};
use crate::numcore::{ShapeError, Tensor2};

pub fn mse(pred: &Tensor2, target: &Tensor2) -> Result<f64, ShapeError> {
    pred.require_same_shape(target, "mse")?;
    let n = pred.len().max(1) as f64;
    Ok(pred.data().iter().zip(target.data()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n)
}

pub fn mae(pred: &Tensor2, target: &Tensor2) -> Result<f64, ShapeError> {
    pred.require_same_shape(target, "mae")?;
    let n = pred.len().max(1) as f64;
    Ok(pred.data().iter().zip(target.data()).map(|(p, t)| (p - t).abs()).sum::<f64>() / n)
}

/// `(mse, ∂mse/∂pred)`.
pub fn mse_with_grad(pred: &Tensor2, target: &Tensor2) -> Result<(f64, Tensor2), ShapeError> {
    let loss = mse(pred, target)?;
    let k = 2.0 / pred.len().max(1) as f64;
    let grad = pred.zip_map(target, "mse", |p, t| k * (p - t))?;
    Ok((loss, grad))
}

/// Linear warmup over the first `⌈warmup_frac·total⌉` steps, then cosine
/// decay from `peak_lr` to 0 at `total_steps`.
pub fn cosine_warmup_lr(step: usize, total_steps: usize, peak_lr: f64, warmup_frac: f64) -> f64 {
    let step = step.min(total_steps);
    let warmup = ((warmup_frac * total_steps as f64).ceil() as usize).min(total_steps);
    if step < warmup {
        return peak_lr * step as f64 / warmup as f64;
    }
    if total_steps == warmup {
        return peak_lr;
    }
    let progress = (step - warmup) as f64 / (total_steps - warmup) as f64;
    peak_lr * 0.5 * (1.0 + (PI * progress).cos())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moments mirroring the parameters, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: GradStore,
    pub v: GradStore,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &impl Parameters) -> Self {
        Self {
            m: GradStore::zeros_like(params),
            v: GradStore::zeros_like(params),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. Gradients are checked for NaN/inf before
/// anything is modified.
pub fn adam_step(
    params: &mut impl Parameters,
    grads: &GradStore,
    state: &mut AdamState,
    lr: f64,
    config: &AdamConfig,
) -> Result<()> {
    grads.matches(params).map_err(Error::config)?;
    if let Some((name, _)) = grads.iter().find(|(_, g)| !g.all_finite()) {
        return Err(Error::NonFinite {
            stage: format!("gradient of {name}"),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    let (m_store, v_store) = (&mut state.m, &mut state.v);
    params.visit_mut("", &mut |name, p| {
        let g = grads.get(&name).expect("checked by matches");
        let m = m_store.get_mut(&name).expect("moments mirror parameters");
        for (mi, gi) in m.data_mut().iter_mut().zip(g.data()) {
            *mi = config.beta1 * *mi + (1.0 - config.beta1) * gi;
        }
        let v = v_store.get_mut(&name).expect("moments mirror parameters");
        for (vi, gi) in v.data_mut().iter_mut().zip(g.data()) {
            *vi = config.beta2 * *vi + (1.0 - config.beta2) * gi * gi;
        }
        let m = m_store.get(&name).expect("present");
        for ((pi, mi), vi) in p.data_mut().iter_mut().zip(m.data()).zip(v_store.get(&name).expect("present").data()) {
            let m_hat = mi / c1;
            let v_hat = vi / c2;
            *pi -= lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    });
    Ok(())
}

/// Scales all gradients by `max_norm / norm` when their global L2 norm
/// exceeds `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut GradStore, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale(max_norm / norm);
    }
    norm
}
