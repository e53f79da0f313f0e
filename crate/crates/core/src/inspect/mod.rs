//! Edge-function inspection: every KAN edge `φ(x) = w·SiLU(x) + s·Σ c_k B_k(x)`
//! is a 1-D curve that can be sampled, ranked by activation range and
//! exported.

mod export;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BranchParams, CoreParams, ModelConfig, ModelParams};
use crate::nn::{bspline_basis, KanLayerParams, SplineGrid};
use crate::numcore::silu;

pub use export::{export_curves, read_curves_csv, render_svg, write_curves_csv, ExportFormat};

/// Curves are sampled at this many uniform points on [`SAMPLE_RANGE`].
pub const SAMPLE_POINTS: usize = 257;
pub const SAMPLE_RANGE: (f64, f64) = (-3.0, 3.0);

pub fn sample_grid() -> Vec<f64> {
    let (lo, hi) = SAMPLE_RANGE;
    let step = (hi - lo) / (SAMPLE_POINTS - 1) as f64;
    (0..SAMPLE_POINTS).map(|s| lo + step * s as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Trend,
    Residual,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::Trend => "trend",
            Branch::Residual => "residual",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trend" => Ok(Branch::Trend),
            "residual" => Ok(Branch::Residual),
            other => Err(Error::config(format!("unknown branch `{other}` (trend or residual)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCurve {
    pub branch: Branch,
    pub layer: usize,
    /// Input unit `i`.
    pub input: usize,
    /// Output unit `j`.
    pub output: usize,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    /// `max φ − min φ` over the samples.
    pub activation_range: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerActivitySummary {
    pub branch: Branch,
    pub layer: usize,
    pub edge_count: usize,
    pub mean_range: f64,
    /// Population standard deviation over the layer's edges.
    pub std_range: f64,
}

fn branch_params(params: &ModelParams, branch: Branch) -> Option<&BranchParams> {
    match branch {
        Branch::Trend => params.trend.as_ref(),
        Branch::Residual => Some(&params.residual),
    }
}

/// KAN layers of `branch`; an error when the branch is absent or not a KAN.
pub fn kan_layers(params: &ModelParams, branch: Branch) -> Result<&[KanLayerParams]> {
    match branch_params(params, branch).map(|b| &b.core) {
        Some(CoreParams::Kan(layers)) => Ok(layers),
        Some(other) => Err(Error::config(format!("{branch} branch has a {} core, not a KAN", other.kind()))),
        None => Err(Error::config(format!("model has no {branch} branch"))),
    }
}

fn layer_at(params: &ModelParams, branch: Branch, layer: usize) -> Result<&KanLayerParams> {
    let layers = kan_layers(params, branch)?;
    layers
        .get(layer)
        .ok_or_else(|| Error::config(format!("{branch} branch has {} KAN layers, no layer {layer}", layers.len())))
}

/// SiLU and basis values at the sample points, shared by every edge.
struct Sampler {
    silu: Vec<f64>,
    /// `SAMPLE_POINTS × nb`, row-major.
    basis: Vec<f64>,
    nb: usize,
}

impl Sampler {
    fn new(grid: &SplineGrid) -> Self {
        let xs = sample_grid();
        Self {
            silu: xs.iter().map(|&x| silu(x)).collect(),
            basis: xs.iter().flat_map(|&x| bspline_basis(x, grid)).collect(),
            nb: grid.num_basis(),
        }
    }

    fn edge(&self, l: &KanLayerParams, i: usize, j: usize) -> Vec<f64> {
        let w = l.base_weight.get(j, i);
        let s = l.spline_scaler.get(j, i);
        let coef = l.edge_coef(i, j);
        (0..SAMPLE_POINTS)
            .map(|p| {
                let b = &self.basis[p * self.nb..(p + 1) * self.nb];
                w * self.silu[p] + s * b.iter().zip(coef).map(|(b, c)| b * c).sum::<f64>()
            })
            .collect()
    }

    fn range(&self, l: &KanLayerParams, i: usize, j: usize) -> f64 {
        value_range(&self.edge(l, i, j))
    }
}

fn value_range(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

fn curve(sampler: &Sampler, l: &KanLayerParams, branch: Branch, layer: usize, i: usize, j: usize) -> EdgeCurve {
    let values = sampler.edge(l, i, j);
    EdgeCurve {
        branch,
        layer,
        input: i,
        output: j,
        x: sample_grid(),
        activation_range: value_range(&values),
        values,
    }
}

/// Samples the edge `i → j` of one KAN layer, using only that edge's weights.
pub fn extract_edge(
    params: &ModelParams,
    config: &ModelConfig,
    branch: Branch,
    layer: usize,
    i: usize,
    j: usize,
) -> Result<EdgeCurve> {
    let l = layer_at(params, branch, layer)?;
    if i >= l.in_dim || j >= l.out_dim {
        return Err(Error::config(format!(
            "edge {i} → {j} is outside the {} × {} layer",
            l.in_dim, l.out_dim
        )));
    }
    Ok(curve(&Sampler::new(&config.grid()), l, branch, layer, i, j))
}

/// The `k` edges with the largest activation range, descending; equal
/// ranges keep `(i, j)` order. `k` is capped at the edge count.
pub fn top_edges(params: &ModelParams, config: &ModelConfig, branch: Branch, layer: usize, k: usize) -> Result<Vec<EdgeCurve>> {
    let l = layer_at(params, branch, layer)?;
    let sampler = Sampler::new(&config.grid());
    let mut ranked: Vec<(f64, usize, usize)> = Vec::with_capacity(l.in_dim * l.out_dim);
    for i in 0..l.in_dim {
        for j in 0..l.out_dim {
            ranked.push((sampler.range(l, i, j), i, j));
        }
    }
    // stable sort on the (i, j)-ordered list keeps ties in (i, j) order
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(_, i, j)| curve(&sampler, l, branch, layer, i, j))
        .collect())
}

/// Mean and standard deviation of the activation range over every edge of
/// every KAN layer (trend branch first).
pub fn layer_activity(params: &ModelParams, config: &ModelConfig) -> Vec<LayerActivitySummary> {
    let sampler = Sampler::new(&config.grid());
    let mut out = Vec::new();
    for branch in [Branch::Trend, Branch::Residual] {
        let Ok(layers) = kan_layers(params, branch) else {
            continue;
        };
        for (li, l) in layers.iter().enumerate() {
            let mut ranges = Vec::with_capacity(l.in_dim * l.out_dim);
            for i in 0..l.in_dim {
                for j in 0..l.out_dim {
                    ranges.push(sampler.range(l, i, j));
                }
            }
            let n = ranges.len() as f64;
            let mean = ranges.iter().sum::<f64>() / n;
            let var = ranges.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
            out.push(LayerActivitySummary {
                branch,
                layer: li,
                edge_count: ranges.len(),
                mean_range: mean,
                std_range: var.sqrt(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::kan_forward;
    use crate::numcore::{Rng, Tensor2};

    fn small() -> ModelConfig {
        let mut c = ModelConfig::new(32, 4, 1);
        c.patch_len = 8;
        c.stride = 8;
        c.embed_dim = 4;
        c.kan_hidden = 6;
        c.ma_kernel = 5;
        c
    }

    #[test]
    fn sample_grid_hits_ends_and_midpoint() {
        let xs = sample_grid();
        assert_eq!(xs.len(), 257);
        assert_eq!((xs[0], xs[128], xs[256]), (-3.0, 0.0, 3.0));
    }

    #[test]
    fn silu_edge_and_zero_edge() {
        let c = small();
        let mut p = ModelParams::init(&c, &Rng::new(1));
        if let CoreParams::Kan(layers) = &mut p.residual.core {
            layers[1].spline_coef.fill(0.0);
            layers[1].base_weight.set(2, 3, 1.0);
            layers[1].base_weight.set(0, 0, 0.0);
        }
        let e = extract_edge(&p, &c, Branch::Residual, 1, 3, 2).unwrap();
        for (x, v) in e.x.iter().zip(&e.values) {
            assert_eq!(*v, silu(*x));
        }
        let z = extract_edge(&p, &c, Branch::Residual, 1, 0, 0).unwrap();
        assert_eq!(z.activation_range, 0.0);
        assert!(extract_edge(&p, &c, Branch::Residual, 1, 6, 0).is_err());
        assert!(extract_edge(&p, &c, Branch::Residual, 3, 0, 0).is_err());
    }

    #[test]
    fn edge_matches_single_edge_forward() {
        let c = small();
        let p = ModelParams::init(&c, &Rng::new(2));
        let grid = c.grid();
        let layers = kan_layers(&p, Branch::Trend).unwrap();
        let mut rng = Rng::new(3);
        for _ in 0..6 {
            let li = rng.below(layers.len() as u64) as usize;
            let l = &layers[li];
            let (i, j) = (rng.below(l.in_dim as u64) as usize, rng.below(l.out_dim as u64) as usize);
            // oracle: a copy of the layer where every other edge is zero
            let mut solo = KanLayerParams::zeros(l.in_dim, l.out_dim, &grid);
            solo.base_weight.set(j, i, l.base_weight.get(j, i));
            solo.spline_scaler.set(j, i, l.spline_scaler.get(j, i));
            let nb = grid.num_basis();
            for k in 0..nb {
                solo.spline_coef.set(j, i * nb + k, l.spline_coef.get(j, i * nb + k));
            }
            let e = extract_edge(&p, &c, Branch::Trend, li, i, j).unwrap();
            for (s, &x) in e.x.iter().enumerate().step_by(16) {
                let mut probe = Tensor2::zeros(1, l.in_dim);
                probe.set(0, i, x);
                let (y, _) = kan_forward(&probe, &solo, &grid).unwrap();
                assert!((y.get(0, j) - e.values[s]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ranking_contract() {
        let c = small();
        let mut p = ModelParams::init(&c, &Rng::new(4));
        let all = top_edges(&p, &c, Branch::Residual, 1, usize::MAX).unwrap();
        assert_eq!(all.len(), 6 * 6);
        assert!(all.windows(2).all(|w| w[0].activation_range >= w[1].activation_range));
        // with the residual term off, scaling every scaler keeps the ranking
        if let CoreParams::Kan(layers) = &mut p.residual.core {
            layers[0].base_weight.fill(0.0);
        }
        let order = |p: &ModelParams| -> Vec<(usize, usize)> {
            top_edges(p, &c, Branch::Residual, 0, 8)
                .unwrap()
                .iter()
                .map(|e| (e.input, e.output))
                .collect()
        };
        let before = order(&p);
        if let CoreParams::Kan(layers) = &mut p.residual.core {
            layers[0].spline_scaler.scale_in_place(2.5);
            layers[1].spline_coef.set(4, 5 * 8 + 4, 50.0);
        }
        assert_eq!(before, order(&p));
        let top = &top_edges(&p, &c, Branch::Residual, 1, 1).unwrap()[0];
        assert_eq!((top.input, top.output), (5, 4));
    }

    #[test]
    fn ties_keep_index_order() {
        let c = small();
        let mut p = ModelParams::init(&c, &Rng::new(5));
        p.residual.core.silence();
        let e = top_edges(&p, &c, Branch::Residual, 2, 5).unwrap();
        let idx: Vec<(usize, usize)> = e.iter().map(|e| (e.input, e.output)).collect();
        assert_eq!(idx, vec![(0, 0), (0, 1), (0, 2), (0, 3), (1, 0)]);
    }

    #[test]
    fn untrained_zero_coef_activity_is_scaled_silu_range() {
        let c = small();
        let mut p = ModelParams::init(&c, &Rng::new(6));
        for core in [&mut p.trend.as_mut().unwrap().core, &mut p.residual.core] {
            if let CoreParams::Kan(layers) = core {
                for l in layers {
                    l.spline_coef.fill(0.0);
                }
            }
        }
        let xs = sample_grid();
        let silu_range = value_range(&xs.iter().map(|&x| silu(x)).collect::<Vec<_>>());
        let acts = layer_activity(&p, &c);
        assert_eq!(acts.len(), 6);
        for a in &acts {
            let l = &kan_layers(&p, a.branch).unwrap()[a.layer];
            let mean_w = l.base_weight.data().iter().map(|w| w.abs()).sum::<f64>() / l.base_weight.len() as f64;
            assert!((a.mean_range - mean_w * silu_range).abs() < 1e-12);
            assert_eq!(a.edge_count, l.in_dim * l.out_dim);
            assert!(a.std_range >= 0.0);
        }
    }

    #[test]
    fn edge_counts_of_the_long_lookback_model() {
        let c = ModelConfig::new(336, 96, 1);
        assert_eq!(c.kan_widths(), vec![1312, 64, 64, 96]);
        let p = ModelParams::zeros(&c);
        let counts: Vec<usize> = layer_activity(&p, &c).iter().filter(|a| a.branch == Branch::Trend).map(|a| a.edge_count).collect();
        assert_eq!(counts, vec![83_968, 4_096, 6_144]);
    }
}
