//! Optimization: losses, Adam, the warmup-cosine schedule, clipping,
//! bidirectional augmentation and the training loop.

mod augment;
mod fit;
mod optim;

pub use augment::{bidirectional_augment, reverse_time};
pub use fit::{
    evaluate_split, fit, fit_from, EarlyStopper, EpochRecord, RunRecord, SplitMetrics, StopDecision, TrainConfig,
};
pub use optim::{adam_step, clip_grad_norm, cosine_warmup_lr, mae, mse, mse_with_grad, AdamConfig, AdamState};
