use super::{ShapeError, Tensor2};

/// Row/column strides of an operand as seen by the product kernel.
fn strides(t: &Tensor2, transposed: bool) -> (isize, isize) {
    let c = t.cols() as isize;
    if transposed {
        (1, c)
    } else {
        (c, 1)
    }
}

fn gemm(a: &Tensor2, ta: bool, b: &Tensor2, tb: bool, op: &str) -> Result<Tensor2, ShapeError> {
    let (m, k) = if ta { (a.cols(), a.rows()) } else { a.shape() };
    let (k2, n) = if tb { (b.cols(), b.rows()) } else { b.shape() };
    if k != k2 {
        return Err(ShapeError::new(
            op,
            format!(
                "left operand {}x{}{} and right operand {}x{}{} have incompatible inner dimensions",
                a.rows(),
                a.cols(),
                if ta { " (transposed)" } else { "" },
                b.rows(),
                b.cols(),
                if tb { " (transposed)" } else { "" },
            ),
        ));
    }
    let mut out = Tensor2::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return Ok(out);
    }
    let (rsa, csa) = strides(a, ta);
    let (rsb, csb) = strides(b, tb);
    // SAFETY: pointers come from live, correctly sized buffers; the strides
    // describe their row-major layout and `out` does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data().as_ptr(),
            rsa,
            csa,
            b.data().as_ptr(),
            rsb,
            csb,
            0.0,
            out.data_mut().as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(out)
}

/// `a · b`.
pub fn matmul(a: &Tensor2, b: &Tensor2) -> Result<Tensor2, ShapeError> {
    gemm(a, false, b, false, "matmul")
}

/// `a · bᵀ`.
pub fn matmul_nt(a: &Tensor2, b: &Tensor2) -> Result<Tensor2, ShapeError> {
    gemm(a, false, b, true, "matmul_nt")
}

/// `aᵀ · b`.
pub fn matmul_tn(a: &Tensor2, b: &Tensor2) -> Result<Tensor2, ShapeError> {
    gemm(a, true, b, false, "matmul_tn")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Tensor2, b: &Tensor2) -> Tensor2 {
        let mut out = Tensor2::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn identity_left() {
        let b = Tensor2::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&Tensor2::identity(2), &b).unwrap(), b);
    }

    #[test]
    fn row_times_column() {
        let a = Tensor2::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Tensor2::column(&[3.0, 4.0]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c.get(0, 0), 11.0);
    }

    #[test]
    fn mismatch_names_both_operands() {
        let err = matmul(&Tensor2::zeros(2, 3), &Tensor2::zeros(4, 2)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("4x2"), "{msg}");
    }

    #[test]
    fn transposed_variants_agree_with_naive() {
        let a = Tensor2::from_vec(3, 4, (0..12).map(|v| v as f64 * 0.5 - 2.0).collect()).unwrap();
        let b = Tensor2::from_vec(5, 4, (0..20).map(|v| (v as f64).sin()).collect()).unwrap();
        let expect = naive(&a, &b.transpose());
        assert_eq!(matmul_nt(&a, &b).unwrap().shape(), (3, 5));
        for (x, y) in matmul_nt(&a, &b).unwrap().data().iter().zip(expect.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        let expect = naive(&a.transpose(), &a);
        for (x, y) in matmul_tn(&a, &a).unwrap().data().iter().zip(expect.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
