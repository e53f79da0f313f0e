use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::parallel::par_map;
use crate::data::{SeriesDataset, Split};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};
use crate::train::{evaluate_split, fit, RunRecord, TrainConfig};

/// Everything that determines one training run besides the data itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dataset: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut s = self.clone();
        s.train.seed = seed;
        s
    }
}

/// Hex SHA-256 of the JSON form of both configurations.
pub fn config_fingerprint(model: &ModelConfig, train: &TrainConfig) -> String {
    let json = serde_json::to_vec(&(model, train)).expect("configs serialize");
    format!("{:x}", Sha256::digest(&json))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub horizon: usize,
    pub seed: u64,
    pub split: Split,
    pub mse: f64,
    pub mae: f64,
    pub windows: usize,
    pub fingerprint: String,
    /// Not serialized, so metric files of identical runs are identical.
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl PartialEq for MetricReport {
    fn eq(&self, other: &Self) -> bool {
        self.dataset == other.dataset
            && self.horizon == other.horizon
            && self.seed == other.seed
            && self.split == other.split
            && self.mse.to_bits() == other.mse.to_bits()
            && self.mae.to_bits() == other.mae.to_bits()
            && self.windows == other.windows
            && self.fingerprint == other.fingerprint
    }
}

/// MSE and MAE over every forward window of `split` (standardized units),
/// averaged uniformly over windows, channels and horizon steps.
pub fn evaluate(params: &ModelParams, spec: &RunSpec, ds: &SeriesDataset, split: Split) -> Result<MetricReport> {
    let started = Instant::now();
    let m = evaluate_split(params, &spec.model, ds, split)?;
    Ok(MetricReport {
        dataset: spec.dataset.clone(),
        horizon: spec.model.horizon,
        seed: spec.train.seed,
        split,
        mse: m.mse,
        mae: m.mae,
        windows: m.windows,
        fingerprint: config_fingerprint(&spec.model, &spec.train),
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

/// Output of [`run`].
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub params: ModelParams,
    pub record: RunRecord,
    pub val: MetricReport,
    pub test: MetricReport,
}

/// Fits `spec` and evaluates the restored best parameters on validation and test.
pub fn run(spec: &RunSpec, ds: &SeriesDataset) -> Result<RunOutcome> {
    let started = Instant::now();
    let (params, record) = fit(&spec.model, ds, &spec.train)?;
    let val = evaluate(&params, spec, ds, Split::Val)?;
    let mut test = evaluate(&params, spec, ds, Split::Test)?;
    test.runtime_secs = started.elapsed().as_secs_f64();
    Ok(RunOutcome {
        params,
        record,
        val,
        test,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

/// Test MSE over seeds: mean and sample standard deviation (`n − 1`) of the
/// successful runs. Failed seeds are listed and excluded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub dataset: String,
    pub horizon: usize,
    pub mean: f64,
    pub std: f64,
    pub mae_mean: f64,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
    pub reports: Vec<MetricReport>,
    pub failed: Vec<SeedFailure>,
}

impl SeedSummary {
    pub fn flagged(&self) -> bool {
        !self.failed.is_empty()
    }

    /// `0.148±0.001`.
    pub fn cell(&self) -> String {
        format!("{:.3}±{:.3}", self.mean, self.std)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; `NaN` for fewer than two values.
pub fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Runs `spec` once per seed (up to `jobs` at a time) and aggregates test MSE.
pub fn multi_seed(spec: &RunSpec, ds: &SeriesDataset, seeds: &[u64], jobs: usize) -> Result<SeedSummary> {
    if seeds.len() < 2 {
        return Err(Error::config(format!("multi-seed runs need at least 2 seeds, got {}", seeds.len())));
    }
    let outcomes = par_map(seeds, jobs, |_, &seed| run(&spec.with_seed(seed), ds).map(|o| o.test));
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    let mut first_error = None;
    for (&seed, outcome) in seeds.iter().zip(outcomes) {
        match outcome {
            Ok(r) => reports.push(r),
            Err(e) => {
                failed.push(SeedFailure {
                    seed,
                    error: e.to_string(),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    if let (true, Some(e)) = (reports.is_empty(), first_error) {
        return Err(e);
    }
    let values: Vec<f64> = reports.iter().map(|r| r.mse).collect();
    let maes: Vec<f64> = reports.iter().map(|r| r.mae).collect();
    Ok(SeedSummary {
        dataset: spec.dataset.clone(),
        horizon: spec.model.horizon,
        mean: mean(&values),
        std: sample_std(&values),
        mae_mean: mean(&maes),
        seeds: reports.iter().map(|r| r.seed).collect(),
        values,
        reports,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{window_origins, SplitConvention};
    use crate::numcore::{rand_normal, Rng, Tensor2};

    fn tiny_spec() -> RunSpec {
        let mut m = ModelConfig::new(32, 4, 2);
        m.patch_len = 8;
        m.stride = 8;
        m.kan_hidden = 8;
        m.mlp_hidden = 8;
        m.ma_kernel = 5;
        RunSpec {
            dataset: "noise".into(),
            model: m,
            train: TrainConfig {
                max_epochs: 2,
                max_batches_per_epoch: Some(2),
                ..TrainConfig::default()
            },
        }
    }

    fn noise_ds(rows: usize) -> SeriesDataset {
        let raw = rand_normal(&mut Rng::new(8), 0.0, 1.0, rows, 2).unwrap();
        SeriesDataset::new("noise", vec!["a".into(), "b".into()], raw, SplitConvention::SEVENTY_TEN_TWENTY).unwrap()
    }

    fn mean_forecaster(spec: &RunSpec) -> ModelParams {
        let mut p = ModelParams::init(&spec.model, &crate::numcore::Rng::new(1));
        p.trend.as_mut().unwrap().core.silence();
        p.residual.core.silence();
        p
    }

    #[test]
    fn mean_forecaster_matches_direct_computation() {
        let spec = tiny_spec();
        let ds = noise_ds(600);
        let r = evaluate(&mean_forecaster(&spec), &spec, &ds, Split::Test).unwrap();
        let (l, h) = (32, 4);
        let (mut se, mut n) = (0.0, 0);
        for o in window_origins(&ds, Split::Test, l, h).unwrap() {
            for c in 0..2 {
                let mu = (o..o + l).map(|t| ds.values.get(t, c)).sum::<f64>() / l as f64;
                for t in o + l..o + l + h {
                    se += (ds.values.get(t, c) - mu).powi(2);
                    n += 1;
                }
            }
        }
        assert!((r.mse - se / n as f64).abs() < 1e-9);
        // roughly unit variance for z-scored white noise
        assert!((0.7..1.4).contains(&r.mse), "{}", r.mse);
        assert_eq!(r.windows * 2 * h, n);
    }

    #[test]
    fn flat_series_is_forecast_perfectly() {
        let spec = tiny_spec();
        let ds = SeriesDataset::new(
            "flat",
            vec!["a".into(), "b".into()],
            Tensor2::filled(300, 2, 4.5),
            SplitConvention::SEVENTY_TEN_TWENTY,
        )
        .unwrap();
        let r = evaluate(&mean_forecaster(&spec), &spec, &ds, Split::Test).unwrap();
        assert_eq!((r.mse, r.mae), (0.0, 0.0));
    }

    #[test]
    fn fingerprint_tracks_configuration() {
        let a = tiny_spec();
        let f = config_fingerprint(&a.model, &a.train);
        assert_eq!(f, config_fingerprint(&a.model, &a.train));
        assert_eq!(f.len(), 64);
        let mut b = a.clone();
        b.train.lr *= 2.0;
        assert_ne!(f, config_fingerprint(&b.model, &b.train));
        let mut c = a.clone();
        c.model.kan_hidden += 1;
        assert_ne!(f, config_fingerprint(&c.model, &c.train));
    }

    #[test]
    fn seed_summary_statistics() {
        let spec = tiny_spec();
        let ds = noise_ds(400);
        let same = multi_seed(&spec, &ds, &[5, 5, 5], 1).unwrap();
        assert_eq!(same.std, 0.0);
        assert!(!same.flagged());
        let s = multi_seed(&spec, &ds, &[1, 2, 3], 2).unwrap();
        assert_eq!(s.mean, mean(&s.values));
        let rev = multi_seed(&spec, &ds, &[3, 2, 1], 1).unwrap();
        assert!((rev.std - s.std).abs() < 1e-15);
        assert_eq!(s.seeds, vec![1, 2, 3]);
        assert!(multi_seed(&spec, &ds, &[1], 1).is_err());
    }

    #[test]
    fn sample_std_convention() {
        assert_eq!(sample_std(&[1.0, 3.0]), 2f64.sqrt());
        assert!(sample_std(&[1.0]).is_nan());
        assert_eq!(format!("{:.3}±{:.3}", 0.1484, 0.0012), "0.148±0.001");
    }
}
