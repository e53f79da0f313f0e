//! Central finite-difference verification of analytic gradients.
//!
//! Relative error of one element is `|a - n| / max(|a|, |n|, floor)`; the
//! floor keeps gradients that are zero up to round-off from reporting
//! spurious relative errors.

use super::params::{GradStore, Parameters};
use crate::numcore::Rng;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckEntry {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&GradCheckEntry> {
        self.entries.iter().max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.entries.iter().all(|e| e.max_rel_err < tol)
    }

    pub fn extend(&mut self, prefix: &str, other: GradCheckReport) {
        for mut e in other.entries {
            e.name = format!("{prefix}{}", e.name);
            self.entries.push(e);
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub floor: f64,
    /// Check at most this many randomly chosen elements per tensor.
    pub max_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            floor: DEFAULT_FLOOR,
            max_per_tensor: None,
            seed: 0,
        }
    }
}

fn set_element<P: Parameters>(params: &mut P, tensor: usize, elem: usize, value: f64) {
    let mut idx = 0;
    params.visit_mut("", &mut |_, t| {
        if idx == tensor {
            t.data_mut()[elem] = value;
        }
        idx += 1;
    });
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` against central differences of `loss` around `params`.
pub fn check_gradients<P, F>(params: &P, analytic: &GradStore, options: &GradCheckOptions, loss: F) -> GradCheckReport
where
    P: Parameters + Clone,
    F: Fn(&P) -> f64,
{
    let mut work = params.clone();
    let mut rng = Rng::new(options.seed);
    let mut report = GradCheckReport::default();
    let shapes: Vec<(String, Vec<f64>)> = params
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();
    for (ti, (name, values)) in shapes.iter().enumerate() {
        let grad = analytic
            .get(name)
            .unwrap_or_else(|| panic!("no analytic gradient for {name}"));
        let mut picks: Vec<usize> = (0..values.len()).collect();
        if let Some(m) = options.max_per_tensor {
            if m < picks.len() {
                rng.shuffle(&mut picks);
                picks.truncate(m);
                picks.sort_unstable();
            }
        }
        let mut entry = GradCheckEntry {
            name: name.clone(),
            checked: picks.len(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for &e in &picks {
            let orig = values[e];
            set_element(&mut work, ti, e, orig + options.step);
            let up = loss(&work);
            set_element(&mut work, ti, e, orig - options.step);
            let down = loss(&work);
            set_element(&mut work, ti, e, orig);
            let numeric = (up - down) / (2.0 * options.step);
            let a = grad.data()[e];
            let err = relative_error(a, numeric, options.floor);
            if err > entry.max_rel_err || !err.is_finite() {
                entry.max_rel_err = if err.is_finite() { err } else { f64::INFINITY };
                entry.worst_index = e;
                entry.analytic = a;
                entry.numeric = numeric;
            }
        }
        report.entries.push(entry);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::{dense_backward, dense_forward, DenseParams};
    use crate::nn::kan::{init_kan_layer, kan_backward, kan_forward, KanLayerParams};
    use crate::nn::spline::SplineGrid;
    use crate::numcore::{rand_uniform, Tensor2};

    fn probe_loss(y: &Tensor2, r: &Tensor2) -> f64 {
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn kan_layer_matches_finite_differences() {
        let grid = SplineGrid::standard();
        for seed in 0..10u64 {
            let mut rng = Rng::new(100 + seed);
            let mut p = init_kan_layer(&mut rng, 6, 3, &grid);
            p.spline_coef = rand_uniform(&mut rng, -1.0, 1.0, 3, 6 * 8).unwrap();
            p.spline_scaler = rand_uniform(&mut rng, 0.5, 1.5, 3, 6).unwrap();
            let x = rand_uniform(&mut rng, -1.2, 1.2, 4, 6).unwrap();
            let r = rand_uniform(&mut rng, -1.0, 1.0, 4, 3).unwrap();
            let (_, cache) = kan_forward(&x, &p, &grid).unwrap();
            let (gx, g) = kan_backward(&cache, &p, &r).unwrap();
            let report = check_gradients(&p, &GradStore::from_params(&g), &GradCheckOptions::default(), |q: &KanLayerParams| {
                probe_loss(&kan_forward(&x, q, &grid).unwrap().0, &r)
            });
            assert!(report.passes(1e-4), "seed {seed}: {:?}", report.worst());

            let h = 1e-5;
            for e in 0..x.len() {
                let mut xp = x.clone();
                xp.data_mut()[e] += h;
                let mut xm = x.clone();
                xm.data_mut()[e] -= h;
                let fd = (probe_loss(&kan_forward(&xp, &p, &grid).unwrap().0, &r)
                    - probe_loss(&kan_forward(&xm, &p, &grid).unwrap().0, &r))
                    / (2.0 * h);
                assert!(relative_error(gx.data()[e], fd, DEFAULT_FLOOR) < 1e-4);
            }
        }
    }

    #[test]
    fn dense_layer_matches_finite_differences() {
        for seed in 0..10u64 {
            let mut rng = Rng::new(seed);
            let p = DenseParams::init(&mut rng, 5, 4);
            let x = rand_uniform(&mut rng, -2.0, 2.0, 3, 5).unwrap();
            let r = rand_uniform(&mut rng, -1.0, 1.0, 3, 4).unwrap();
            let (_, g) = dense_backward(&x, &p, &r).unwrap();
            let report = check_gradients(&p, &GradStore::from_params(&g), &GradCheckOptions::default(), |q: &DenseParams| {
                probe_loss(&dense_forward(&x, q).unwrap(), &r)
            });
            assert!(report.passes(1e-4), "{:?}", report.worst());
        }
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let mut rng = Rng::new(0);
        let p = DenseParams::init(&mut rng, 3, 2);
        let x = rand_uniform(&mut rng, -1.0, 1.0, 4, 3).unwrap();
        let r = rand_uniform(&mut rng, -1.0, 1.0, 4, 2).unwrap();
        let (_, mut g) = dense_backward(&x, &p, &r).unwrap();
        g.weight.data_mut()[1] *= 1.01;
        let report = check_gradients(&p, &GradStore::from_params(&g), &GradCheckOptions::default(), |q: &DenseParams| {
            probe_loss(&dense_forward(&x, q).unwrap(), &r)
        });
        assert!(!report.passes(1e-4));
        assert_eq!(report.worst().unwrap().name, "weight");
    }
}
