//! Differentiable building blocks with hand-written backward passes.

mod dense;
pub mod gradcheck;
mod kan;
mod params;
mod spline;

pub use dense::{dense_backward, dense_forward, DenseParams};
pub use kan::{init_kan_layer, kan_backward, kan_forward, KanCache, KanLayerParams};
pub use params::{GradStore, Parameters};
pub(crate) use params::join;
pub use spline::{bspline_basis, bspline_basis_deriv, SplineGrid};
