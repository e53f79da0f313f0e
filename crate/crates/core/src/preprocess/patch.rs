use serde::{Deserialize, Serialize};

use crate::nn::{dense_backward, dense_forward, DenseParams};
use crate::numcore::{ConfigError, ShapeError, Tensor2};

/// Overlapping windows `[i·S, i·S + P)` for `i < N = ⌊(L − P)/S⌋ + 1`.
/// Up to `S − 1` trailing samples of the series are not covered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub patch_len: usize,
    pub stride: usize,
    pub embed_dim: usize,
    pub lookback: usize,
}

impl PatchSpec {
    pub fn new(patch_len: usize, stride: usize, embed_dim: usize, lookback: usize) -> Result<Self, ConfigError> {
        if patch_len == 0 || stride == 0 || embed_dim == 0 {
            return Err(ConfigError("patch length, stride and embedding size must be positive".into()));
        }
        if patch_len > lookback {
            return Err(ConfigError(format!("patch length {patch_len} exceeds lookback {lookback}")));
        }
        Ok(Self {
            patch_len,
            stride,
            embed_dim,
            lookback,
        })
    }

    pub fn num_patches(&self) -> usize {
        (self.lookback - self.patch_len) / self.stride + 1
    }

    /// Length of the flattened embedding, `N·d`.
    pub fn flat_len(&self) -> usize {
        self.num_patches() * self.embed_dim
    }

    /// Samples `[0, covered())` feed at least one patch.
    pub fn covered(&self) -> usize {
        (self.num_patches() - 1) * self.stride + self.patch_len
    }
}

/// Cut each row into patches, stacked as `(rows·N) × P`.
fn extract(series: &Tensor2, spec: &PatchSpec) -> Tensor2 {
    let n = spec.num_patches();
    let p = spec.patch_len;
    let mut out = Tensor2::zeros(series.rows() * n, p);
    for r in 0..series.rows() {
        let row = series.row(r);
        for i in 0..n {
            let s = i * spec.stride;
            out.row_mut(r * n + i).copy_from_slice(&row[s..s + p]);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct PatchCache {
    patches: Tensor2,
    rows: usize,
}

/// Embeds every patch with the shared dense map and concatenates the
/// embeddings in patch order: one `N·d` row per input series.
pub fn patch_embed(series: &Tensor2, spec: &PatchSpec, embed: &DenseParams) -> Result<(Tensor2, PatchCache), ShapeError> {
    if series.cols() != spec.lookback || series.cols() < spec.patch_len {
        return Err(ShapeError::new(
            "patch_embed",
            format!("series length {} with patch spec for L={} P={}", series.cols(), spec.lookback, spec.patch_len),
        ));
    }
    if embed.in_dim() != spec.patch_len || embed.out_dim() != spec.embed_dim {
        return Err(ShapeError::new(
            "patch_embed",
            format!("embedding {}->{} for patches {}->{}", embed.in_dim(), embed.out_dim(), spec.patch_len, spec.embed_dim),
        ));
    }
    let patches = extract(series, spec);
    let emb = dense_forward(&patches, embed)?;
    let flat = emb.reshape(series.rows(), spec.flat_len())?;
    Ok((
        flat,
        PatchCache {
            patches,
            rows: series.rows(),
        },
    ))
}

/// Returns `(series_grad, embed_grads)`.
pub fn patch_embed_backward(
    cache: &PatchCache,
    spec: &PatchSpec,
    embed: &DenseParams,
    upstream: &Tensor2,
) -> Result<(Tensor2, DenseParams), ShapeError> {
    if upstream.shape() != (cache.rows, spec.flat_len()) {
        return Err(ShapeError::new(
            "patch_embed_backward",
            format!("upstream {:?}, expected {}x{}", upstream.shape(), cache.rows, spec.flat_len()),
        ));
    }
    let n = spec.num_patches();
    let up = upstream.clone().reshape(cache.rows * n, spec.embed_dim)?;
    let (d_patches, g) = dense_backward(&cache.patches, embed, &up)?;
    let mut d_series = Tensor2::zeros(cache.rows, spec.lookback);
    for r in 0..cache.rows {
        let dst = d_series.row_mut(r);
        for i in 0..n {
            let s = i * spec.stride;
            for (d, v) in dst[s..s + spec.patch_len].iter_mut().zip(d_patches.row(r * n + i)) {
                *d += v;
            }
        }
    }
    Ok((d_series, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{rand_uniform, Rng};

    #[test]
    fn patch_counts() {
        let s = PatchSpec::new(16, 8, 32, 336).unwrap();
        assert_eq!(s.num_patches(), 41);
        assert_eq!(s.flat_len(), 1312);
        let s = PatchSpec::new(16, 8, 32, 512).unwrap();
        assert_eq!(s.num_patches(), 63);
        assert_eq!(s.flat_len(), 2016);
        assert_eq!(PatchSpec::new(16, 8, 32, 16).unwrap().num_patches(), 1);
        assert!(PatchSpec::new(16, 8, 32, 15).is_err());
    }

    #[test]
    fn trailing_samples_are_dropped() {
        let s = PatchSpec::new(16, 8, 4, 30).unwrap();
        // N = 2 covers [0, 24)
        assert_eq!(s.num_patches(), 2);
        assert_eq!(s.covered(), 24);
        assert!(s.covered() <= s.lookback && s.lookback - s.covered() < s.stride);
        let mut rng = Rng::new(1);
        let embed = DenseParams::init(&mut rng, 16, 4);
        let x = rand_uniform(&mut rng, -1.0, 1.0, 2, 30).unwrap();
        let mut y = x.clone();
        for r in 0..2 {
            for t in 24..30 {
                y.set(r, t, 99.0);
            }
        }
        assert_eq!(patch_embed(&x, &s, &embed).unwrap().0, patch_embed(&y, &s, &embed).unwrap().0);
    }

    #[test]
    fn layout_is_patch_major() {
        let s = PatchSpec::new(2, 1, 1, 3).unwrap();
        // embedding = sum of the patch
        let embed = DenseParams {
            weight: Tensor2::filled(1, 2, 1.0),
            bias: Tensor2::zeros(1, 1),
        };
        let x = Tensor2::from_rows(&[vec![1.0, 2.0, 4.0]]).unwrap();
        let (e, _) = patch_embed(&x, &s, &embed).unwrap();
        assert_eq!(e.data(), &[3.0, 6.0]);
    }

    #[test]
    fn backward_matches_finite_differences_on_input() {
        let s = PatchSpec::new(4, 2, 3, 11).unwrap();
        let mut rng = Rng::new(5);
        let embed = DenseParams::init(&mut rng, 4, 3);
        let x = rand_uniform(&mut rng, -1.0, 1.0, 2, 11).unwrap();
        let r = rand_uniform(&mut rng, -1.0, 1.0, 2, s.flat_len()).unwrap();
        let (_, cache) = patch_embed(&x, &s, &embed).unwrap();
        let (dx, _) = patch_embed_backward(&cache, &s, &embed, &r).unwrap();
        let f = |x: &Tensor2| patch_embed(x, &s, &embed).unwrap().0.hadamard(&r).unwrap().sum();
        for e in 0..x.len() {
            let mut a = x.clone();
            a.data_mut()[e] += 1e-6;
            let mut b = x.clone();
            b.data_mut()[e] -= 1e-6;
            let fd = (f(&a) - f(&b)) / 2e-6;
            assert!((fd - dx.data()[e]).abs() < 1e-8);
        }
        // sample 10 is past the last patch
        assert_eq!(dx.get(0, 10), 0.0);
    }
}
