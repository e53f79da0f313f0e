//! Stages around the forecasting cores: RevIN, the learned adaptive
//! normalization, moving-average decomposition and patch embedding.
//!
//! All stages take one series per row, so a batch of `B` windows with `C`
//! channels is a `(B·C) × L` tensor.

mod adaptive;
mod decompose;
mod patch;
mod revin;

pub use adaptive::{
    adaptive_denorm, adaptive_denorm_backward, adaptive_forward, adaptive_forward_backward, AdaptiveCache, AdaptiveDims,
    AdaptiveNormParams, DenormCache,
};
pub use decompose::{decompose, moving_average, moving_average_transpose};
pub use patch::{patch_embed, patch_embed_backward, PatchCache, PatchSpec};
pub use revin::{revin_denormalize, revin_denormalize_rows, revin_normalize, revin_normalize_rows, RevinState, REVIN_EPS};
