use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::parallel::par_map;
use super::report::{run, RunSpec};
use crate::data::SeriesDataset;
use crate::error::{Error, Result};
use crate::model::{make_ablation, Ablation};

pub const ABLATION_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    Model(Ablation),
    /// Training without time-reversed pairs.
    NoBidirectional,
}

impl Variant {
    /// The full model, every model ablation and `no_bidirectional`.
    pub fn all() -> Vec<Variant> {
        let mut v = vec![Variant::Full];
        v.extend(Ablation::ALL.into_iter().map(Variant::Model));
        v.push(Variant::NoBidirectional);
        v
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Model(a) => a.name(),
            Variant::NoBidirectional => "no_bidirectional",
        }
    }

    pub fn apply(&self, base: &RunSpec) -> RunSpec {
        let mut s = base.clone();
        match self {
            Variant::Full => {}
            Variant::Model(a) => s.model = make_ablation(&base.model, *a),
            Variant::NoBidirectional => s.train.bidirectional = false,
        }
        s
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Variant::Full),
            "no_bidirectional" => Ok(Variant::NoBidirectional),
            other => other.parse().map(Variant::Model),
        }
    }
}

/// `(variant − full) / full × 100`, rounded to one decimal.
pub fn delta_pct(variant: f64, full: f64) -> f64 {
    ((variant - full) / full * 1000.0).round() / 10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub mse: f64,
    pub mae: f64,
    pub delta_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub dataset: String,
    pub horizon: usize,
    pub seed: u64,
    /// The full model first.
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, v: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == v)
    }
}

/// Trains the full model and every variant with one seed and reports test
/// MSE with the relative change against the full model.
pub fn ablation_sweep(base: &RunSpec, ds: &SeriesDataset, variants: &[Variant], seed: u64, jobs: usize) -> Result<AblationTable> {
    let mut order = vec![Variant::Full];
    order.extend(variants.iter().copied().filter(|v| *v != Variant::Full));
    let specs: Vec<RunSpec> = order.iter().map(|v| v.apply(&base.with_seed(seed))).collect();
    let outcomes = par_map(&specs, jobs, |_, spec| run(spec, ds).map(|o| o.test));
    let mut reports = Vec::with_capacity(order.len());
    for o in outcomes {
        reports.push(o?);
    }
    let full = reports[0].mse;
    Ok(AblationTable {
        dataset: base.dataset.clone(),
        horizon: base.model.horizon,
        seed,
        rows: order
            .into_iter()
            .zip(reports)
            .map(|(variant, r)| AblationRow {
                variant,
                mse: r.mse,
                mae: r.mae,
                delta_pct: delta_pct(r.mse, full),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_convention() {
        assert_eq!(delta_pct(0.5, 0.5), 0.0);
        assert_eq!(delta_pct(0.55, 0.5), 10.0);
        assert_eq!(delta_pct(0.503, 0.5), 0.6);
        assert_eq!(delta_pct(0.45, 0.5), -10.0);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::all() {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("no_such".parse::<Variant>().is_err());
        assert_eq!(Variant::all().len(), 7);
    }
}
