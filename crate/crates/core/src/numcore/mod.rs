//! Dense 2-D arrays, activations and the deterministic random stream that
//! everything else is built on. No implicit broadcasting anywhere: every
//! shape mismatch is reported as a [`ShapeError`].

mod activation;
mod linalg;
mod rng;
mod tensor;

pub use activation::{gelu, gelu_deriv, sigmoid, silu, silu_deriv, GELU_SQRT_2_OVER_PI};
pub use linalg::{matmul, matmul_nt, matmul_tn};
pub use rng::{rand_normal, rand_uniform, Rng};
pub use tensor::Tensor2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("shape error in {op}: {detail}")]
pub struct ShapeError {
    pub op: String,
    pub detail: String,
}

impl ShapeError {
    pub fn new(op: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            op: op.into(),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use super::Rng;

    fn tensor(rows: usize, cols: usize, seed: u64) -> Tensor2 {
        rand_uniform(&mut Rng::new(seed), -1.0, 1.0, rows, cols).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn matmul_is_associative(m in 1usize..6, k in 1usize..6, n in 1usize..6, p in 1usize..6, seed in 0u64..1000) {
            let a = tensor(m, k, seed);
            let b = tensor(k, n, seed + 1);
            let c = tensor(n, p, seed + 2);
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            let scale = left.max_abs().max(1e-12);
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() / scale < 1e-9);
            }
        }
    }

    #[test]
    fn elementwise_ops_reject_mismatched_shapes() {
        let a = Tensor2::zeros(2, 3);
        let b = Tensor2::zeros(3, 2);
        assert!(a.add(&b).is_err());
        assert!(a.sub(&b).is_err());
        assert!(a.hadamard(&b).is_err());
        assert!(Tensor2::from_vec(2, 2, vec![1.0; 3]).is_err());
    }
}
