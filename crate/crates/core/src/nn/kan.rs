//! KAN layer: every edge `i → j` carries
//! `φ(x) = w·SiLU(x) + s·Σ_k c_k·B_k(x)`
//! with a residual weight `w`, a per-edge scaler `s` and `G + p` spline
//! coefficients `c_k`.

use serde::{Deserialize, Serialize};

use super::params::{join, Parameters};
use super::spline::SplineGrid;
use crate::numcore::{matmul, matmul_nt, matmul_tn, rand_normal, rand_uniform, silu, silu_deriv, Rng, ShapeError, Tensor2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KanLayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out × in`, residual weight per edge
    pub base_weight: Tensor2,
    /// `out × (in·(G+p))`, coefficient `k` of edge `(j, i)` at column `i·(G+p) + k`
    pub spline_coef: Tensor2,
    /// `out × in`
    pub spline_scaler: Tensor2,
}

impl KanLayerParams {
    pub fn zeros(in_dim: usize, out_dim: usize, grid: &SplineGrid) -> Self {
        Self {
            in_dim,
            out_dim,
            base_weight: Tensor2::zeros(out_dim, in_dim),
            spline_coef: Tensor2::zeros(out_dim, in_dim * grid.num_basis()),
            spline_scaler: Tensor2::zeros(out_dim, in_dim),
        }
    }

    pub fn num_basis(&self) -> usize {
        self.spline_coef.cols() / self.in_dim.max(1)
    }

    /// `in·out·(G + p + 2)`.
    pub fn param_count(in_dim: usize, out_dim: usize, grid: &SplineGrid) -> usize {
        in_dim * out_dim * (grid.num_basis() + 2)
    }

    /// Coefficients of edge `i → j`.
    pub fn edge_coef(&self, i: usize, j: usize) -> &[f64] {
        let nb = self.num_basis();
        &self.spline_coef.row(j)[i * nb..(i + 1) * nb]
    }

    /// Coefficients multiplied by their edge scaler.
    fn effective_coef(&self) -> Tensor2 {
        let nb = self.num_basis();
        let mut c = self.spline_coef.clone();
        for j in 0..self.out_dim {
            let scal = self.spline_scaler.row(j).to_vec();
            for (k, v) in c.row_mut(j).iter_mut().enumerate() {
                *v *= scal[k / nb];
            }
        }
        c
    }
}

impl Parameters for KanLayerParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor2)) {
        f(join(prefix, "base_weight"), &self.base_weight);
        f(join(prefix, "spline_coef"), &self.spline_coef);
        f(join(prefix, "spline_scaler"), &self.spline_scaler);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor2)) {
        f(join(prefix, "base_weight"), &mut self.base_weight);
        f(join(prefix, "spline_coef"), &mut self.spline_coef);
        f(join(prefix, "spline_scaler"), &mut self.spline_scaler);
    }
}

/// `base_weight ~ U(±√(6/in))`, `spline_coef ~ N(0, 0.1/√(G+p))`, scaler = 1.
pub fn init_kan_layer(rng: &mut Rng, in_dim: usize, out_dim: usize, grid: &SplineGrid) -> KanLayerParams {
    assert!(in_dim >= 1 && out_dim >= 1, "KAN layer dims must be positive");
    let nb = grid.num_basis();
    let bound = (6.0 / in_dim as f64).sqrt();
    let base_weight = rand_uniform(rng, -bound, bound, out_dim, in_dim).expect("positive bound");
    let spline_coef = rand_normal(rng, 0.0, 0.1 / (nb as f64).sqrt(), out_dim, in_dim * nb).expect("valid std");
    KanLayerParams {
        in_dim,
        out_dim,
        base_weight,
        spline_coef,
        spline_scaler: Tensor2::filled(out_dim, in_dim, 1.0),
    }
}

/// Activations retained by [`kan_forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct KanCache {
    in_dim: usize,
    out_dim: usize,
    input: Tensor2,
    /// `batch × (in·nb)`
    basis: Tensor2,
    /// `batch × (in·nb)`
    basis_deriv: Tensor2,
}

impl KanCache {
    pub fn input(&self) -> &Tensor2 {
        &self.input
    }
}

/// Evaluates `B_k(x)` and `B'_k(x)` for every element of `input`, laid out
/// as `batch × (in·nb)`.
fn expand_basis(input: &Tensor2, grid: &SplineGrid) -> (Tensor2, Tensor2) {
    let nb = grid.num_basis();
    let (batch, in_dim) = input.shape();
    let mut basis = Tensor2::zeros(batch, in_dim * nb);
    let mut deriv = Tensor2::zeros(batch, in_dim * nb);
    let mut scratch = Vec::with_capacity(grid.knots().len());
    for b in 0..batch {
        let x = input.row(b);
        let brow = basis.row_mut(b);
        let mut tmp = vec![0.0; in_dim * nb];
        for i in 0..in_dim {
            grid.eval_into(
                x[i],
                &mut brow[i * nb..(i + 1) * nb],
                Some(&mut tmp[i * nb..(i + 1) * nb]),
                &mut scratch,
            );
        }
        deriv.row_mut(b).copy_from_slice(&tmp);
    }
    (basis, deriv)
}

pub fn kan_forward(input: &Tensor2, params: &KanLayerParams, grid: &SplineGrid) -> Result<(Tensor2, KanCache), ShapeError> {
    if input.cols() != params.in_dim {
        return Err(ShapeError::new(
            "kan_forward",
            format!("input has {} columns, layer expects {}", input.cols(), params.in_dim),
        ));
    }
    if params.num_basis() != grid.num_basis() {
        return Err(ShapeError::new(
            "kan_forward",
            format!("layer holds {} coefficients per edge, grid has {} basis functions", params.num_basis(), grid.num_basis()),
        ));
    }
    let activated = input.map(silu);
    let (basis, basis_deriv) = expand_basis(input, grid);
    let mut out = matmul_nt(&activated, &params.base_weight)?;
    out.add_assign(&matmul_nt(&basis, &params.effective_coef())?)?;
    let cache = KanCache {
        in_dim: params.in_dim,
        out_dim: params.out_dim,
        input: input.clone(),
        basis,
        basis_deriv,
    };
    Ok((out, cache))
}

/// Exact gradients of [`kan_forward`]; returns `(input_grad, param_grads)`.
pub fn kan_backward(
    cache: &KanCache,
    params: &KanLayerParams,
    upstream: &Tensor2,
) -> Result<(Tensor2, KanLayerParams), ShapeError> {
    if cache.in_dim != params.in_dim || cache.out_dim != params.out_dim {
        return Err(ShapeError::new(
            "kan_backward",
            format!(
                "cache from a {}->{} layer used with a {}->{} layer",
                cache.in_dim, cache.out_dim, params.in_dim, params.out_dim
            ),
        ));
    }
    if upstream.shape() != (cache.input.rows(), params.out_dim) {
        return Err(ShapeError::new(
            "kan_backward",
            format!("upstream {:?} for a batch of {} and {} outputs", upstream.shape(), cache.input.rows(), params.out_dim),
        ));
    }
    let nb = params.num_basis();
    let activated = cache.input.map(silu);

    let base_weight = matmul_tn(upstream, &activated)?;
    let coef_eff_grad = matmul_tn(upstream, &cache.basis)?;
    let mut spline_coef = coef_eff_grad.clone();
    let mut spline_scaler = Tensor2::zeros(params.out_dim, params.in_dim);
    for j in 0..params.out_dim {
        let scal = params.spline_scaler.row(j);
        let coef = params.spline_coef.row(j);
        let g = coef_eff_grad.row(j);
        for (i, sg) in spline_scaler.row_mut(j).iter_mut().enumerate() {
            let lo = i * nb;
            *sg = (lo..lo + nb).map(|k| g[k] * coef[k]).sum();
        }
        for (k, v) in spline_coef.row_mut(j).iter_mut().enumerate() {
            *v *= scal[k / nb];
        }
    }

    let through_base = matmul(upstream, &params.base_weight)?;
    let through_basis = matmul(upstream, &params.effective_coef())?;
    let mut input_grad = Tensor2::zeros(cache.input.rows(), params.in_dim);
    for b in 0..cache.input.rows() {
        let x = cache.input.row(b);
        let tb = through_base.row(b);
        let ts = through_basis.row(b);
        let bd = cache.basis_deriv.row(b);
        let out = input_grad.row_mut(b);
        for i in 0..params.in_dim {
            let lo = i * nb;
            let spline: f64 = (lo..lo + nb).map(|k| ts[k] * bd[k]).sum();
            out[i] = silu_deriv(x[i]) * tb[i] + spline;
        }
    }

    Ok((
        input_grad,
        KanLayerParams {
            in_dim: params.in_dim,
            out_dim: params.out_dim,
            base_weight,
            spline_coef,
            spline_scaler,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spline::{bspline_basis, bspline_basis_deriv};

    fn single_edge(k: usize, grid: &SplineGrid) -> KanLayerParams {
        let mut p = KanLayerParams::zeros(1, 1, grid);
        p.spline_scaler.set(0, 0, 1.0);
        p.spline_coef.set(0, k, 1.0);
        p
    }

    #[test]
    fn zero_coef_reduces_to_base_path() {
        let grid = SplineGrid::standard();
        let mut rng = Rng::new(1);
        let mut p = init_kan_layer(&mut rng, 5, 3, &grid);
        p.spline_coef.fill(0.0);
        p.spline_scaler = rand_uniform(&mut rng, -2.0, 2.0, 3, 5).unwrap();
        let x = rand_uniform(&mut rng, -2.0, 2.0, 4, 5).unwrap();
        let (y, _) = kan_forward(&x, &p, &grid).unwrap();
        let expect = matmul_nt(&x.map(silu), &p.base_weight).unwrap();
        for (a, b) in y.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-14);
        }
        p.base_weight.fill(0.0);
        let (y0, _) = kan_forward(&Tensor2::zeros(2, 5), &p, &grid).unwrap();
        assert!(y0.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_edge_reproduces_basis_function() {
        let grid = SplineGrid::standard();
        for k in 0..grid.num_basis() {
            let p = single_edge(k, &grid);
            for x in [-0.93, -0.31, 0.0, 0.47, 0.88] {
                let (y, _) = kan_forward(&Tensor2::column(&[x]), &p, &grid).unwrap();
                assert!((y.get(0, 0) - bspline_basis(x, &grid)[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_edge_input_grad_is_basis_derivative() {
        let grid = SplineGrid::standard();
        let p = single_edge(4, &grid);
        let x = 0.137;
        let (_, cache) = kan_forward(&Tensor2::column(&[x]), &p, &grid).unwrap();
        let up = 2.5;
        let (gx, _) = kan_backward(&cache, &p, &Tensor2::column(&[up])).unwrap();
        let expect = up * bspline_basis_deriv(x, &grid)[4];
        assert!((gx.get(0, 0) - expect).abs() < 1e-14);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let grid = SplineGrid::standard();
        let mut rng = Rng::new(4);
        let p = init_kan_layer(&mut rng, 6, 3, &grid);
        let x = rand_uniform(&mut rng, -1.5, 1.5, 4, 6).unwrap();
        let (_, cache) = kan_forward(&x, &p, &grid).unwrap();
        let (gx, g) = kan_backward(&cache, &p, &Tensor2::zeros(4, 3)).unwrap();
        assert_eq!(gx.max_abs(), 0.0);
        assert_eq!(g.num_params(), p.num_params());
        g.visit("", &mut |_, t| assert_eq!(t.max_abs(), 0.0));
    }

    #[test]
    fn mismatched_cache_is_rejected() {
        let grid = SplineGrid::standard();
        let mut rng = Rng::new(4);
        let p = init_kan_layer(&mut rng, 6, 3, &grid);
        let q = init_kan_layer(&mut rng, 6, 2, &grid);
        let (_, cache) = kan_forward(&Tensor2::zeros(2, 6), &p, &grid).unwrap();
        assert!(kan_backward(&cache, &q, &Tensor2::zeros(2, 2)).is_err());
        assert!(kan_backward(&cache, &p, &Tensor2::zeros(3, 3)).is_err());
        assert!(kan_forward(&Tensor2::zeros(2, 5), &p, &grid).is_err());
    }

    #[test]
    fn init_contract() {
        let grid = SplineGrid::standard();
        let a = init_kan_layer(&mut Rng::new(3), 7, 4, &grid);
        let b = init_kan_layer(&mut Rng::new(3), 7, 4, &grid);
        assert_eq!(a, b);
        assert!(a.spline_scaler.data().iter().all(|v| *v == 1.0));
        let bound = (6.0f64 / 7.0).sqrt();
        assert!(a.base_weight.data().iter().all(|v| v.abs() <= bound));
        assert_eq!(a.num_params(), KanLayerParams::param_count(7, 4, &grid));
        assert_eq!(KanLayerParams::param_count(1312, 64, &grid), 839_680);
    }
}
