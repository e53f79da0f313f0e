//! Win-rate experiments on synthetic univariate signals.
//!
//! Contenders run without RevIN or the adaptive stage, so the trend
//! experiments expose how each core extrapolates:
//!
//! * `kan` — one KAN stack `[L, hidden, H]` on the raw window,
//! * `mlp` — dense `[L, h, H]` with `h` chosen so the parameter count is
//!   within ±20% of `kan`,
//! * `hybrid` — moving-average decomposition, MLP on the trend and KAN on
//!   the residual (each branch half the width of its standalone contender),
//! * `kan_patched` — patch embedding in front of the KAN stack.

use serde::{Deserialize, Serialize};

use super::parallel::par_map;
use crate::data::{gen_synthetic, Split, SyntheticKind, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{count_params, CoreKind, ModelConfig};
use crate::train::{evaluate_split, fit, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contender {
    Kan,
    Mlp,
    Hybrid,
    KanPatched,
}

impl Contender {
    pub fn name(&self) -> &'static str {
        match self {
            Contender::Kan => "kan",
            Contender::Mlp => "mlp",
            Contender::Hybrid => "hybrid",
            Contender::KanPatched => "kan_patched",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSettings {
    pub lookback: usize,
    pub horizon: usize,
    /// Series length; split 70/10/20.
    pub length: usize,
    pub trials: usize,
    pub kan_hidden: usize,
    /// Spline grid of the KAN contenders.
    pub grid_size: usize,
    pub grid_range: (f64, f64),
    pub noise_std: f64,
    /// Bounded signal of the first experiment.
    pub periodic_kind: SyntheticKind,
    /// Trial `i` uses signal seed `seed + i`; every contender sees the same signal.
    pub seed: u64,
    pub train: TrainConfig,
    /// `k` values of the capacity sweep.
    pub ks: Vec<usize>,
    pub jobs: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            lookback: 96,
            horizon: 96,
            length: 1200,
            trials: 10,
            kan_hidden: 16,
            grid_size: 5,
            grid_range: (-1.0, 1.0),
            noise_std: 0.0,
            periodic_kind: SyntheticKind::SineMix,
            seed: 1000,
            train: TrainConfig {
                lr: 3e-3,
                max_epochs: 40,
                patience: 40,
                max_batches_per_epoch: Some(40),
                ..TrainConfig::default()
            },
            ks: (1..=10).collect(),
            jobs: 1,
        }
    }
}

fn raw_config(s: &SynthSettings) -> ModelConfig {
    let mut c = ModelConfig::new(s.lookback, s.horizon, 1);
    c.use_revin = false;
    c.use_adaptive = false;
    c.use_decomposition = false;
    c.use_patching = false;
    c.kan_depth = 1;
    c.kan_hidden = s.kan_hidden;
    c.grid_size = s.grid_size;
    (c.grid_lo, c.grid_hi) = s.grid_range;
    c
}

/// Hidden width making a one-hidden-layer MLP closest to `target` parameters.
fn matched_mlp_hidden(base: &ModelConfig, target: usize) -> usize {
    let per_unit = base.core_input() + 1 + base.horizon;
    let fixed = base.horizon;
    (((target.saturating_sub(fixed)) as f64 / per_unit as f64).round() as usize).max(1)
}

pub fn contender_config(contender: Contender, s: &SynthSettings) -> ModelConfig {
    let base = raw_config(s);
    let kan_params = base.core_param_count(CoreKind::Kan);
    match contender {
        Contender::Kan => base,
        Contender::Mlp => {
            let mut c = base.clone();
            c.trend_core = CoreKind::Mlp;
            c.residual_core = CoreKind::Mlp;
            c.mlp_hidden = matched_mlp_hidden(&base, kan_params);
            c
        }
        Contender::Hybrid => {
            let mut c = base.clone();
            c.use_decomposition = true;
            c.trend_core = CoreKind::Mlp;
            c.residual_core = CoreKind::Kan;
            c.kan_hidden = (s.kan_hidden / 2).max(1);
            c.mlp_hidden = (matched_mlp_hidden(&base, kan_params) / 2).max(1);
            c
        }
        Contender::KanPatched => {
            let mut c = base;
            c.use_patching = true;
            c
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub signal_seed: u64,
    /// Test MSE per contender, in contender order.
    pub mse: Vec<f64>,
    /// Index of the strictly best contender; `None` on an exact tie.
    pub winner: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinRateResult {
    pub label: String,
    pub signal: SyntheticKind,
    pub k: Option<usize>,
    pub contenders: Vec<Contender>,
    pub param_counts: Vec<usize>,
    pub trials: Vec<Trial>,
    pub wins: Vec<usize>,
    pub ties: usize,
}

impl WinRateResult {
    pub fn wins_of(&self, c: Contender) -> usize {
        self.contenders.iter().position(|x| *x == c).map_or(0, |i| self.wins[i])
    }

    pub fn mse_of(&self, c: Contender) -> Vec<f64> {
        match self.contenders.iter().position(|x| *x == c) {
            Some(i) => self.trials.iter().map(|t| t.mse[i]).collect(),
            None => Vec::new(),
        }
    }

    pub fn median_mse(&self, c: Contender) -> f64 {
        median(&self.mse_of(c))
    }

    /// Trials where `a` has strictly lower MSE than `b`.
    pub fn pairwise_wins(&self, a: Contender, b: Contender) -> usize {
        self.mse_of(a).iter().zip(self.mse_of(b)).filter(|(x, y)| **x < *y).count()
    }

    /// Median over trials of `mse(b) / mse(a)`.
    pub fn median_ratio(&self, a: Contender, b: Contender) -> f64 {
        let r: Vec<f64> = self.mse_of(a).iter().zip(self.mse_of(b)).map(|(x, y)| y / x).collect();
        median(&r)
    }
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn winner(mse: &[f64]) -> Option<usize> {
    let best = mse.iter().copied().fold(f64::INFINITY, f64::min);
    let at: Vec<usize> = (0..mse.len()).filter(|&i| mse[i] == best).collect();
    (at.len() == 1).then(|| at[0])
}

/// Trains every contender on `trials` fresh signals of `kind` and records
/// test MSEs and win counts.
pub fn win_rate(
    label: &str,
    kind: SyntheticKind,
    k: usize,
    contenders: &[Contender],
    s: &SynthSettings,
) -> Result<WinRateResult> {
    let configs: Vec<ModelConfig> = contenders.iter().map(|&c| contender_config(c, s)).collect();
    let jobs: Vec<(usize, usize)> = (0..s.trials).flat_map(|t| (0..contenders.len()).map(move |c| (t, c))).collect();
    let results = par_map(&jobs, s.jobs, |_, &(t, c)| -> Result<f64> {
        let spec = SyntheticSpec::random(kind, s.length, k, s.seed + t as u64).with_noise(s.noise_std);
        let ds = gen_synthetic(&spec)?;
        let mut tc = s.train.clone();
        tc.seed = s.seed + 7919 * t as u64;
        let (params, _) = fit(&configs[c], &ds, &tc)?;
        Ok(evaluate_split(&params, &configs[c], &ds, Split::Test)?.mse)
    });
    let mut trials = Vec::with_capacity(s.trials);
    let mut wins = vec![0; contenders.len()];
    let mut ties = 0;
    let mut it = results.into_iter();
    for t in 0..s.trials {
        let mse = (0..contenders.len()).map(|_| it.next().expect("one result per job")).collect::<Result<Vec<f64>>>()?;
        let w = winner(&mse);
        match w {
            Some(i) => wins[i] += 1,
            None => ties += 1,
        }
        trials.push(Trial {
            signal_seed: s.seed + t as u64,
            mse,
            winner: w,
        });
    }
    Ok(WinRateResult {
        label: label.to_string(),
        signal: kind,
        k: (kind == SyntheticKind::KSinusoids).then_some(k),
        contenders: contenders.to_vec(),
        param_counts: configs.iter().map(count_params).collect(),
        trials,
        wins,
        ties,
    })
}

/// Step 1: `kan` vs `mlp` on bounded periodic signals, then with a trend.
/// Step 2: `hybrid` vs `kan` vs `mlp` on sine + cosine + trend.
/// Step 3: `kan`, `kan_patched`, `mlp` on sums of `k` sinusoids for every `k` in `ks`.
pub fn synth_experiment(step: u8, s: &SynthSettings) -> Result<Vec<WinRateResult>> {
    use Contender::*;
    match step {
        1 => Ok(vec![
            win_rate("periodic", s.periodic_kind, 0, &[Kan, Mlp], s)?,
            win_rate("trend", SyntheticKind::SinePlusTrend, 0, &[Kan, Mlp], s)?,
        ]),
        2 => Ok(vec![win_rate("sine+cosine+trend", SyntheticKind::SinePlusTrend, 0, &[Hybrid, Kan, Mlp], s)?]),
        3 => s
            .ks
            .iter()
            .map(|&k| win_rate(&format!("k={k}"), SyntheticKind::KSinusoids, k, &[Kan, KanPatched, Mlp], s))
            .collect(),
        other => Err(Error::config(format!("synthetic step must be 1, 2 or 3, got {other}"))),
    }
}
