//! Channel-independent long-horizon forecasting with decomposed patch-KAN
//! branches: numerics, layers, the model, training, data handling,
//! evaluation, edge inspection and gradient self-checks.

pub mod data;
mod error;
pub mod eval;
pub mod inspect;
pub mod model;
pub mod nn;
pub mod numcore;
pub mod preprocess;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
