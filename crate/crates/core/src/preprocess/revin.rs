use serde::{Deserialize, Serialize};

use crate::numcore::{ShapeError, Tensor2};

/// Added to the population variance before the square root.
pub const REVIN_EPS: f64 = 1e-5;

/// Per-series statistics of one input window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevinState {
    pub mu: Vec<f64>,
    /// `sqrt(var + eps)`, population variance
    pub sigma: Vec<f64>,
    pub eps: f64,
}

impl RevinState {
    /// Statistics that make normalize/denormalize the identity.
    pub fn identity(n: usize) -> Self {
        Self {
            mu: vec![0.0; n],
            sigma: vec![1.0; n],
            eps: REVIN_EPS,
        }
    }
}

/// Normalizes each row (one series per row).
pub fn revin_normalize_rows(x: &Tensor2, eps: f64) -> Result<(Tensor2, RevinState), ShapeError> {
    let len = x.cols();
    if len < 2 {
        return Err(ShapeError::new("revin_normalize", format!("series of length {len}, need at least 2")));
    }
    let mut out = x.clone();
    let mut mu = Vec::with_capacity(x.rows());
    let mut sigma = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row(r);
        let m = row.iter().sum::<f64>() / len as f64;
        let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / len as f64;
        let s = (var + eps).sqrt();
        for v in out.row_mut(r) {
            *v = (*v - m) / s;
        }
        mu.push(m);
        sigma.push(s);
    }
    Ok((out, RevinState { mu, sigma, eps }))
}

pub fn revin_denormalize_rows(y: &Tensor2, state: &RevinState) -> Result<Tensor2, ShapeError> {
    if y.rows() != state.mu.len() {
        return Err(ShapeError::new(
            "revin_denormalize",
            format!("{} series but statistics for {}", y.rows(), state.mu.len()),
        ));
    }
    let mut out = y.clone();
    for r in 0..y.rows() {
        let (m, s) = (state.mu[r], state.sigma[r]);
        for v in out.row_mut(r) {
            *v = *v * s + m;
        }
    }
    Ok(out)
}

/// Window layout `L × C`: normalizes each column.
pub fn revin_normalize(x: &Tensor2, eps: f64) -> Result<(Tensor2, RevinState), ShapeError> {
    let (norm, state) = revin_normalize_rows(&x.transpose(), eps)?;
    Ok((norm.transpose(), state))
}

/// Window layout `H × C`.
pub fn revin_denormalize(y: &Tensor2, state: &RevinState) -> Result<Tensor2, ShapeError> {
    Ok(revin_denormalize_rows(&y.transpose(), state)?.transpose())
}
