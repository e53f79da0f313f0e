//! Moving-average trend/residual split with replicate padding.

use crate::numcore::{ConfigError, Tensor2};

fn check_kernel(kernel: usize) -> Result<(), ConfigError> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(ConfigError(format!("moving-average kernel must be odd and positive, got {kernel}")));
    }
    Ok(())
}

/// Centred moving average of each row; the row is padded with `kernel/2`
/// copies of its first and last value.
pub fn moving_average(x: &Tensor2, kernel: usize) -> Result<Tensor2, ConfigError> {
    check_kernel(kernel)?;
    let half = (kernel / 2) as isize;
    let len = x.cols();
    let mut out = Tensor2::zeros(x.rows(), len);
    if len == 0 {
        return Ok(out);
    }
    let last = len as isize - 1;
    for r in 0..x.rows() {
        let row = x.row(r);
        let dst = out.row_mut(r);
        for (t, d) in dst.iter_mut().enumerate() {
            let t = t as isize;
            let s: f64 = (t - half..=t + half).map(|j| row[j.clamp(0, last) as usize]).sum();
            *d = s / kernel as f64;
        }
    }
    Ok(out)
}

/// Adjoint of [`moving_average`]: maps a gradient on the trend back onto
/// the input.
pub fn moving_average_transpose(grad: &Tensor2, kernel: usize) -> Result<Tensor2, ConfigError> {
    check_kernel(kernel)?;
    let half = (kernel / 2) as isize;
    let len = grad.cols();
    let mut out = Tensor2::zeros(grad.rows(), len);
    if len == 0 {
        return Ok(out);
    }
    let last = len as isize - 1;
    let k = kernel as f64;
    for r in 0..grad.rows() {
        let g = grad.row(r);
        let dst = out.row_mut(r);
        for t in 0..len as isize {
            let share = g[t as usize] / k;
            for j in t - half..=t + half {
                dst[j.clamp(0, last) as usize] += share;
            }
        }
    }
    Ok(out)
}

/// Splits each row into `(trend, residual)`.
///
/// The residual is `x - trend`; the returned trend is then recomputed as
/// `x - residual`, which makes `trend + residual == x` hold bit-exactly for
/// every element with `|x| >= |trend|` and for inputs on a coarse dyadic
/// grid. The adjustment is at most one rounding step of the average.
pub fn decompose(x: &Tensor2, kernel: usize) -> Result<(Tensor2, Tensor2), ConfigError> {
    let avg = moving_average(x, kernel)?;
    let mut trend = avg;
    let mut residual = x.clone();
    for ((t, r), &v) in trend.data_mut().iter_mut().zip(residual.data_mut()).zip(x.data()) {
        *r = v - *t;
        *t = v - *r;
    }
    Ok((trend, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{rand_uniform, Rng};

    #[test]
    fn constant_series() {
        let x = Tensor2::filled(2, 40, 3.25);
        let (t, r) = decompose(&x, 25).unwrap();
        assert_eq!(t, x);
        assert!(r.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_ramp_interior_is_exact() {
        let x = Tensor2::from_vec(1, 60, (0..60).map(|v| v as f64).collect()).unwrap();
        let (t, r) = decompose(&x, 25).unwrap();
        for i in 12..48 {
            // direct summation oracle
            let s: f64 = (i - 12..=i + 12).map(|j| j as f64).sum();
            assert_eq!(t.get(0, i), s / 25.0);
            assert_eq!(t.get(0, i), i as f64);
            assert_eq!(r.get(0, i), 0.0);
        }
    }

    #[test]
    fn replicate_padding_at_edges() {
        let x = Tensor2::from_vec(1, 5, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let t = moving_average(&x, 3).unwrap();
        assert!((t.get(0, 0) - (1.0 + 1.0 + 2.0) / 3.0).abs() < 1e-15);
        assert!((t.get(0, 4) - (4.0 + 5.0 + 5.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn even_kernel_is_rejected() {
        assert!(decompose(&Tensor2::zeros(1, 10), 24).is_err());
        assert!(decompose(&Tensor2::zeros(1, 10), 0).is_err());
    }

    #[test]
    fn transpose_is_the_adjoint() {
        // <M x, g> == <x, Mᵀ g>
        let mut rng = Rng::new(8);
        let x = rand_uniform(&mut rng, -1.0, 1.0, 3, 30).unwrap();
        let g = rand_uniform(&mut rng, -1.0, 1.0, 3, 30).unwrap();
        let lhs = moving_average(&x, 7).unwrap().hadamard(&g).unwrap().sum();
        let rhs = x.hadamard(&moving_average_transpose(&g, 7).unwrap()).unwrap().sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
