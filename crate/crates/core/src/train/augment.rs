use crate::error::{Error, Result};
use crate::numcore::Tensor2;

/// Row order reversed: `z'_s = z_{T−1−s}`.
pub fn reverse_time(segment: &Tensor2) -> Tensor2 {
    let n = segment.rows();
    let idx: Vec<usize> = (0..n).rev().collect();
    segment.select_rows(&idx)
}

/// Time-reverses a full `(L+H) × C` segment. The reversed training pair is
/// `(first L rows, last H rows)` of the result, so the model forecasts the
/// past of the reversed series with an ordinary forward pass.
pub fn bidirectional_augment(segment: &Tensor2, lookback: usize, horizon: usize) -> Result<Tensor2> {
    if segment.rows() != lookback + horizon {
        return Err(Error::config(format!(
            "segment has {} steps, expected L+H = {}",
            segment.rows(),
            lookback + horizon
        )));
    }
    Ok(reverse_time(segment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{rand_normal, Rng};

    #[test]
    fn involution() {
        let z = rand_normal(&mut Rng::new(1), 0.0, 1.0, 12, 3).unwrap();
        let once = bidirectional_augment(&z, 8, 4).unwrap();
        assert_eq!(bidirectional_augment(&once, 8, 4).unwrap(), z);
        assert_eq!(once.row(0), z.row(11));
        assert!(bidirectional_augment(&z, 8, 5).is_err());
    }

    #[test]
    fn palindrome_is_fixed() {
        let z = Tensor2::column(&[1.0, 2.0, 3.0, 2.0, 1.0]);
        assert_eq!(bidirectional_augment(&z, 3, 2).unwrap(), z);
    }
}
