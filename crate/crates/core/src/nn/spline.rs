//! Uniform B-spline basis on an extended knot vector.
//!
//! For grid size `G`, order `p` and range `[lo, hi]` the knots are
//! `t_i = lo + (i - p)·h`, `h = (hi - lo)/G`, for `i = 0..=G+2p`, giving
//! `G + p` basis functions. Values are computed with the Cox–de Boor
//! recursion on half-open knot intervals. Inputs outside `[lo, hi]` go
//! through the same recursion without clamping.

use serde::{Deserialize, Serialize};

use crate::numcore::ConfigError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineGrid {
    grid_size: usize,
    order: usize,
    lo: f64,
    hi: f64,
    knots: Vec<f64>,
}

impl SplineGrid {
    pub fn new(grid_size: usize, order: usize, lo: f64, hi: f64) -> Result<Self, ConfigError> {
        if grid_size == 0 {
            return Err(ConfigError("spline grid size must be at least 1".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(ConfigError(format!("spline range [{lo}, {hi}] is empty")));
        }
        let h = (hi - lo) / grid_size as f64;
        let knots = (0..=grid_size + 2 * order)
            .map(|i| lo + (i as f64 - order as f64) * h)
            .collect();
        Ok(Self {
            grid_size,
            order,
            lo,
            hi,
            knots,
        })
    }

    /// `G = 5`, cubic, on `[-1, 1]`.
    pub fn standard() -> Self {
        Self::new(5, 3, -1.0, 1.0).expect("valid default grid")
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.grid_size as f64
    }

    /// Number of basis functions, `G + p`.
    pub fn num_basis(&self) -> usize {
        self.grid_size + self.order
    }

    /// Runs the recursion up to order `upto`, leaving `knots.len() - 1 - upto`
    /// values at the front of `scratch`.
    fn recurse(&self, x: f64, upto: usize, scratch: &mut Vec<f64>) {
        let t = &self.knots;
        let m = t.len() - 1;
        scratch.clear();
        scratch.extend((0..m).map(|i| if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 }));
        for q in 1..=upto {
            for i in 0..m - q {
                let left = (x - t[i]) / (t[i + q] - t[i]) * scratch[i];
                let right = (t[i + q + 1] - x) / (t[i + q + 1] - t[i + 1]) * scratch[i + 1];
                scratch[i] = left + right;
            }
        }
    }

    /// Writes `B_k(x)` into `basis` and, when requested, `B'_k(x)` into `deriv`.
    /// Both slices must have length [`num_basis`](Self::num_basis).
    pub fn eval_into(&self, x: f64, basis: &mut [f64], deriv: Option<&mut [f64]>, scratch: &mut Vec<f64>) {
        let p = self.order;
        let n = self.num_basis();
        debug_assert_eq!(basis.len(), n);
        let t = &self.knots;
        if p == 0 {
            self.recurse(x, 0, scratch);
            basis.copy_from_slice(&scratch[..n]);
            if let Some(d) = deriv {
                d.fill(0.0);
            }
            return;
        }
        self.recurse(x, p - 1, scratch);
        if let Some(d) = deriv {
            // d/dx B_i^p = p·(B_i^{p-1}/(t_{i+p}-t_i) - B_{i+1}^{p-1}/(t_{i+p+1}-t_{i+1}))
            for i in 0..n {
                d[i] = p as f64
                    * (scratch[i] / (t[i + p] - t[i]) - scratch[i + 1] / (t[i + p + 1] - t[i + 1]));
            }
        }
        for i in 0..n {
            basis[i] = (x - t[i]) / (t[i + p] - t[i]) * scratch[i]
                + (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * scratch[i + 1];
        }
    }
}

pub fn bspline_basis(x: f64, grid: &SplineGrid) -> Vec<f64> {
    let mut out = vec![0.0; grid.num_basis()];
    grid.eval_into(x, &mut out, None, &mut Vec::new());
    out
}

pub fn bspline_basis_deriv(x: f64, grid: &SplineGrid) -> Vec<f64> {
    let n = grid.num_basis();
    let mut basis = vec![0.0; n];
    let mut deriv = vec![0.0; n];
    grid.eval_into(x, &mut basis, Some(&mut deriv), &mut Vec::new());
    deriv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    /// Textbook recursive definition, independent of the in-place recursion.
    fn cox_de_boor(t: &[f64], i: usize, p: usize, x: f64) -> f64 {
        if p == 0 {
            return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
        }
        let a = (x - t[i]) / (t[i + p] - t[i]) * cox_de_boor(t, i, p - 1, x);
        let b = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * cox_de_boor(t, i + 1, p - 1, x);
        a + b
    }

    #[test]
    fn knot_layout() {
        let g = SplineGrid::standard();
        assert_eq!(g.knots().len(), 5 + 2 * 3 + 1);
        assert_eq!(g.num_basis(), 8);
        for (i, k) in g.knots().iter().enumerate() {
            let expect = -1.0 + (i as f64 - 3.0) * 0.4;
            assert!((k - expect).abs() < 1e-15);
        }
        assert!(g.knots().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn matches_recursive_oracle() {
        let g = SplineGrid::standard();
        let mut rng = Rng::new(5);
        for _ in 0..200 {
            let x = rng.uniform_range(-2.5, 2.5);
            let fast = bspline_basis(x, &g);
            for (k, v) in fast.iter().enumerate() {
                let slow = cox_de_boor(g.knots(), k, 3, x);
                assert!((v - slow).abs() < 1e-13, "x={x} k={k}");
            }
        }
    }

    #[test]
    fn interior_grid_point_values() {
        let g = SplineGrid::standard();
        // x = -0.2 is knot index 5, an interior grid point
        let b = bspline_basis(-0.2, &g);
        let nz: Vec<f64> = b.iter().copied().filter(|v| v.abs() > 1e-15).collect();
        assert_eq!(nz.len(), 3);
        for (v, e) in nz.iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
            assert!((v - e).abs() < 1e-14);
        }
        // same values from the recursive oracle at every interior grid point
        for gi in 1..5 {
            let x = -1.0 + 0.4 * gi as f64;
            let mut vals: Vec<f64> = (0..8)
                .map(|k| cox_de_boor(g.knots(), k, 3, x))
                .filter(|v| v.abs() > 1e-15)
                .collect();
            vals.sort_by(f64::total_cmp);
            assert!((vals[0] - 1.0 / 6.0).abs() < 1e-14);
            assert!((vals[2] - 2.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn partition_of_unity_and_local_support() {
        let g = SplineGrid::standard();
        let mut rng = Rng::new(9);
        for i in 0..1000 {
            let x = if i == 0 { 1.0 } else if i == 1 { -1.0 } else { rng.uniform_range(-1.0, 1.0) };
            let b = bspline_basis(x, &g);
            assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12, "x={x}");
            assert!(b.iter().filter(|v| **v != 0.0).count() <= 4);
            assert!(b.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn out_of_range_is_not_clamped() {
        let g = SplineGrid::standard();
        let inside = bspline_basis(1.0, &g);
        let outside = bspline_basis(1.3, &g);
        assert_ne!(inside, outside);
        assert!(outside.iter().sum::<f64>() < 1.0);
    }

    #[test]
    fn derivative_sums_to_zero_and_matches_differences() {
        let g = SplineGrid::standard();
        let mut rng = Rng::new(21);
        let h = 1e-6;
        for _ in 0..25 {
            let x = rng.uniform_range(-0.99, 0.99);
            let d = bspline_basis_deriv(x, &g);
            assert!(d.iter().sum::<f64>().abs() < 1e-10);
            let up = bspline_basis(x + h, &g);
            let dn = bspline_basis(x - h, &g);
            for k in 0..g.num_basis() {
                let fd = (up[k] - dn[k]) / (2.0 * h);
                let denom = d[k].abs().max(fd.abs()).max(1e-3);
                assert!((fd - d[k]).abs() / denom < 1e-6, "x={x} k={k} fd={fd} an={}", d[k]);
            }
        }
    }

    #[test]
    fn order_zero_derivative_vanishes() {
        let g = SplineGrid::new(4, 0, -1.0, 1.0).unwrap();
        assert_eq!(g.num_basis(), 4);
        assert!(bspline_basis_deriv(0.1, &g).iter().all(|v| *v == 0.0));
        assert_eq!(bspline_basis(0.1, &g), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SplineGrid::new(0, 3, -1.0, 1.0).is_err());
        assert!(SplineGrid::new(5, 3, 1.0, 1.0).is_err());
    }
}
