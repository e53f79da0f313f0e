use serde::{Deserialize, Serialize};

use super::params::{join, Parameters};
use crate::numcore::{matmul, matmul_nt, matmul_tn, rand_uniform, Rng, ShapeError, Tensor2};

/// Affine map `y = x·Wᵀ + b` applied row-wise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    /// `out × in`
    pub weight: Tensor2,
    /// `1 × out`
    pub bias: Tensor2,
}

impl DenseParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Tensor2::zeros(out_dim, in_dim),
            bias: Tensor2::zeros(1, out_dim),
        }
    }

    /// Weights and bias uniform in `±1/√in`.
    pub fn init(rng: &mut Rng, in_dim: usize, out_dim: usize) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self {
            weight: rand_uniform(rng, -bound, bound, out_dim, in_dim).expect("positive bound"),
            bias: rand_uniform(rng, -bound, bound, 1, out_dim).expect("positive bound"),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn param_count(in_dim: usize, out_dim: usize) -> usize {
        in_dim * out_dim + out_dim
    }
}

impl Parameters for DenseParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor2)) {
        f(join(prefix, "weight"), &self.weight);
        f(join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor2)) {
        f(join(prefix, "weight"), &mut self.weight);
        f(join(prefix, "bias"), &mut self.bias);
    }
}

pub fn dense_forward(input: &Tensor2, params: &DenseParams) -> Result<Tensor2, ShapeError> {
    if input.cols() != params.in_dim() {
        return Err(ShapeError::new(
            "dense_forward",
            format!("input has {} columns, layer expects {}", input.cols(), params.in_dim()),
        ));
    }
    let mut out = matmul_nt(input, &params.weight)?;
    let b = params.bias.data();
    for r in 0..out.rows() {
        for (o, bv) in out.row_mut(r).iter_mut().zip(b) {
            *o += bv;
        }
    }
    Ok(out)
}

/// Returns `(input_grad, param_grads)` for the forward call on `input`.
pub fn dense_backward(
    input: &Tensor2,
    params: &DenseParams,
    upstream: &Tensor2,
) -> Result<(Tensor2, DenseParams), ShapeError> {
    if upstream.rows() != input.rows() || upstream.cols() != params.out_dim() || input.cols() != params.in_dim() {
        return Err(ShapeError::new(
            "dense_backward",
            format!(
                "input {:?}, upstream {:?}, layer {}->{}",
                input.shape(),
                upstream.shape(),
                params.in_dim(),
                params.out_dim()
            ),
        ));
    }
    let weight = matmul_tn(upstream, input)?;
    let bias = Tensor2::from_vec(1, params.out_dim(), upstream.column_sums())?;
    let input_grad = matmul(upstream, &params.weight)?;
    Ok((input_grad, DenseParams { weight, bias }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights() {
        let p = DenseParams {
            weight: Tensor2::identity(3),
            bias: Tensor2::zeros(1, 3),
        };
        let x = Tensor2::from_rows(&[vec![1.0, -2.0, 0.5], vec![4.0, 0.0, 9.0]]).unwrap();
        assert_eq!(dense_forward(&x, &p).unwrap(), x);
    }

    #[test]
    fn bias_grad_is_upstream_column_sum() {
        let mut rng = Rng::new(2);
        let p = DenseParams::init(&mut rng, 4, 3);
        let x = rand_uniform(&mut rng, -1.0, 1.0, 5, 4).unwrap();
        let up = rand_uniform(&mut rng, -1.0, 1.0, 5, 3).unwrap();
        let (_, g) = dense_backward(&x, &p, &up).unwrap();
        assert_eq!(g.bias.data(), up.column_sums().as_slice());
    }

    #[test]
    fn shape_errors() {
        let p = DenseParams::zeros(4, 2);
        assert!(dense_forward(&Tensor2::zeros(3, 5), &p).is_err());
        assert!(dense_backward(&Tensor2::zeros(3, 4), &p, &Tensor2::zeros(2, 2)).is_err());
    }

    #[test]
    fn param_count_formula() {
        let p = DenseParams::zeros(16, 32);
        assert_eq!(p.num_params(), DenseParams::param_count(16, 32));
        assert_eq!(p.num_params(), 544);
    }
}
