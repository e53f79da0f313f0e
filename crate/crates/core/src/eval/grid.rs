use serde::{Deserialize, Serialize};

use super::parallel::par_map;
use super::report::{run, RunSpec};
use crate::data::SeriesDataset;
use crate::error::{Error, Result};

/// The hyperparameter grid: every combination of learning rate, lookback
/// and bidirectional augmentation, all at one horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub lrs: Vec<f64>,
    pub lookbacks: Vec<usize>,
    pub horizon: usize,
    pub jobs: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            lrs: vec![2e-4, 5e-4, 1e-3],
            lookbacks: vec![336, 512],
            horizon: 96,
            jobs: 1,
        }
    }
}

impl GridSettings {
    pub fn cells(&self) -> Vec<(f64, bool, usize)> {
        let mut out = Vec::new();
        for &lr in &self.lrs {
            for bidirectional in [false, true] {
                for &lookback in &self.lookbacks {
                    out.push((lr, bidirectional, lookback));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lr: f64,
    pub bidirectional: bool,
    pub lookback: usize,
    pub val_mse: f64,
    pub test_mse: f64,
    pub test_mae: f64,
    pub fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub dataset: String,
    pub horizon: usize,
    pub cells: Vec<GridCell>,
    /// Index into `cells`.
    pub best: usize,
}

impl GridResult {
    pub fn best_cell(&self) -> &GridCell {
        &self.cells[self.best]
    }
}

/// Lowest validation MSE; ties go to the lower learning rate, then the
/// shorter lookback, then bidirectional off.
pub fn select_best(cells: &[GridCell]) -> Option<usize> {
    (0..cells.len()).min_by(|&a, &b| {
        let (x, y) = (&cells[a], &cells[b]);
        x.val_mse
            .total_cmp(&y.val_mse)
            .then(x.lr.total_cmp(&y.lr))
            .then(x.lookback.cmp(&y.lookback))
            .then(x.bidirectional.cmp(&y.bidirectional))
    })
}

/// Trains every grid cell from `base` (only lr, lookback, bidirectional and
/// horizon are overridden) and selects by validation MSE.
pub fn tuning_grid(base: &RunSpec, ds: &SeriesDataset, settings: &GridSettings) -> Result<GridResult> {
    let cells = settings.cells();
    if cells.is_empty() {
        return Err(Error::config("tuning grid is empty"));
    }
    let specs: Vec<RunSpec> = cells
        .iter()
        .map(|&(lr, bidirectional, lookback)| {
            let mut s = base.clone();
            s.train.lr = lr;
            s.train.bidirectional = bidirectional;
            s.model.lookback = lookback;
            s.model.horizon = settings.horizon;
            s
        })
        .collect();
    let outcomes = par_map(&specs, settings.jobs, |_, spec| run(spec, ds));
    let mut out = Vec::with_capacity(cells.len());
    for ((&(lr, bidirectional, lookback), spec), outcome) in cells.iter().zip(&specs).zip(outcomes) {
        let o = outcome?;
        out.push(GridCell {
            lr,
            bidirectional,
            lookback,
            val_mse: o.val.mse,
            test_mse: o.test.mse,
            test_mae: o.test.mae,
            fingerprint: super::report::config_fingerprint(&spec.model, &spec.train),
        });
    }
    let best = select_best(&out).expect("non-empty grid");
    Ok(GridResult {
        dataset: base.dataset.clone(),
        horizon: settings.horizon,
        cells: out,
        best,
    })
}
