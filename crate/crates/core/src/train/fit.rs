use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::optim::{adam_step, clip_grad_norm, cosine_warmup_lr, mse_with_grad, AdamConfig, AdamState};
use crate::data::{assemble_rows, window_origins, window_refs, DirectionPolicy, SeriesDataset, Split, WindowRef};
use crate::error::{Error, Result};
use crate::model::{backward, forward_rows, ModelConfig, ModelParams};
use crate::numcore::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub warmup_frac: f64,
    pub clip_norm: f64,
    pub bidirectional: bool,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Caps the mini-batches drawn per epoch (a fresh random subset each
    /// epoch). `None` walks the whole training set.
    #[serde(default)]
    pub max_batches_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            patience: 10,
            warmup_frac: 0.1,
            clip_norm: 1.0,
            bidirectional: false,
            seed: 42,
            adam: AdamConfig::default(),
            max_batches_per_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch size and epoch count must be positive"));
        }
        if !(0.0..1.0).contains(&self.warmup_frac) {
            return Err(Error::config(format!("warmup fraction must be in [0, 1), got {}", self.warmup_frac)));
        }
        if self.clip_norm <= 0.0 {
            return Err(Error::config("clip norm must be positive"));
        }
        if self.max_batches_per_epoch == Some(0) {
            return Err(Error::config("max_batches_per_epoch must be positive"));
        }
        Ok(())
    }

    pub fn policy(&self) -> DirectionPolicy {
        if self.bidirectional {
            DirectionPolicy::Bidirectional
        } else {
            DirectionPolicy::ForwardOnly
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch, measured before each update.
    pub train_loss: f64,
    pub val_mse: f64,
    /// Learning rate of the epoch's last update.
    pub lr: f64,
}

/// Per-epoch history of one training run.
///
/// `wall_time_secs` is not serialized and not compared, so records of
/// identical runs are identical files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    /// Last epoch that ran.
    pub stopped_epoch: usize,
    pub early_stopped: bool,
    pub total_steps: usize,
    pub train_samples: usize,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl PartialEq for RunRecord {
    fn eq(&self, other: &Self) -> bool {
        self.epochs == other.epochs
            && self.best_epoch == other.best_epoch
            && self.best_val_mse.to_bits() == other.best_val_mse.to_bits()
            && self.stopped_epoch == other.stopped_epoch
            && self.early_stopped == other.early_stopped
            && self.total_steps == other.total_steps
            && self.train_samples == other.train_samples
    }
}

impl RunRecord {
    /// `epoch,train_loss,val_mse,lr` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_mse,lr\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{:.16e},{:.16e},{:.16e}\n", e.epoch, e.train_loss, e.val_mse, e.lr));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, value: f64) -> StopDecision {
        if value < self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            return StopDecision::Improved;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub mse: f64,
    pub mae: f64,
    pub windows: usize,
}

const EVAL_CHUNK: usize = 128;

/// MSE and MAE over every forward window of `split`, on standardized values.
pub fn evaluate_split(params: &ModelParams, config: &ModelConfig, ds: &SeriesDataset, split: Split) -> Result<SplitMetrics> {
    let origins = window_origins(ds, split, config.lookback, config.horizon)?;
    if origins.is_empty() {
        return Err(Error::config(format!("{split:?} split has no windows")));
    }
    let refs: Vec<WindowRef> = origins
        .into_iter()
        .map(|origin| WindowRef {
            origin,
            direction: crate::data::Direction::Forward,
        })
        .collect();
    let (mut se, mut ae, mut n) = (0.0, 0.0, 0usize);
    for chunk in refs.chunks(EVAL_CHUNK) {
        let (x, y) = assemble_rows(ds, chunk, config.lookback, config.horizon);
        let (pred, _) = forward_rows(&x, params, config)?;
        for (p, t) in pred.data().iter().zip(y.data()) {
            se += (p - t) * (p - t);
            ae += (p - t).abs();
        }
        n += pred.len();
    }
    Ok(SplitMetrics {
        mse: se / n as f64,
        mae: ae / n as f64,
        windows: refs.len(),
    })
}

fn with_context(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::NonFinite { stage } => Error::NonFinite {
            stage: format!("{stage} (epoch {epoch}, batch {batch})"),
        },
        other => other,
    }
}

/// Trains from a fresh initialization seeded by `train.seed`.
pub fn fit(model: &ModelConfig, ds: &SeriesDataset, train: &TrainConfig) -> Result<(ModelParams, RunRecord)> {
    model.validate()?;
    let init = ModelParams::init(model, &Rng::new(train.seed));
    fit_from(model, init, ds, train, &mut |_| {})
}

/// Trains `params`: seeded shuffles, MSE, backward, clipping, Adam on the
/// warmup-cosine schedule, validation after every epoch, early stopping.
/// Returns the parameters of the best validation epoch.
pub fn fit_from(
    model: &ModelConfig,
    mut params: ModelParams,
    ds: &SeriesDataset,
    train: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(ModelParams, RunRecord)> {
    let started = Instant::now();
    model.validate()?;
    train.validate()?;
    if ds.channels() != model.channels {
        return Err(Error::config(format!(
            "dataset has {} channels, model configured for {}",
            ds.channels(),
            model.channels
        )));
    }
    let (l, h) = (model.lookback, model.horizon);
    let refs = window_refs(ds, Split::Train, l, h, train.policy())?;
    if refs.is_empty() {
        return Err(Error::config("train split has no windows"));
    }
    let full_batches = refs.len().div_ceil(train.batch_size);
    let batches = train.max_batches_per_epoch.map_or(full_batches, |m| m.min(full_batches));
    let total_steps = batches * train.max_epochs;

    let mut shuffle_rng = Rng::new(train.seed).split(0x5348);
    let mut state = AdamState::new(&params);
    let mut stopper = EarlyStopper::new(train.patience.max(1));
    let mut best = params.clone();
    let mut epochs = Vec::new();
    let mut early_stopped = false;
    let mut step = 0;
    let mut order: Vec<usize> = (0..refs.len()).collect();

    for epoch in 1..=train.max_epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut lr = 0.0;
        for b in 0..batches {
            let idx = &order[b * train.batch_size..((b + 1) * train.batch_size).min(order.len())];
            let batch: Vec<WindowRef> = idx.iter().map(|&i| refs[i]).collect();
            let (x, y) = assemble_rows(ds, &batch, l, h);
            let (pred, cache) = forward_rows(&x, &params, model).map_err(|e| with_context(e, epoch, b))?;
            let (loss, d_pred) = mse_with_grad(&pred, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    stage: format!("loss (epoch {epoch}, batch {b})"),
                });
            }
            loss_sum += loss;
            let mut grads = backward(&cache, &params, &d_pred)?;
            clip_grad_norm(&mut grads, train.clip_norm);
            step += 1;
            lr = cosine_warmup_lr(step, total_steps, train.lr, train.warmup_frac);
            adam_step(&mut params, &grads, &mut state, lr, &train.adam).map_err(|e| with_context(e, epoch, b))?;
        }
        let val = evaluate_split(&params, model, ds, Split::Val)?;
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_mse: val.mse,
            lr,
        };
        on_epoch(&rec);
        epochs.push(rec);
        match stopper.observe(epoch, val.mse) {
            StopDecision::Improved => best.copy_from(&params),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                early_stopped = true;
                break;
            }
        }
    }
    if !stopper.best().1.is_finite() {
        return Err(Error::NonFinite {
            stage: "validation".into(),
        });
    }

    let (best_epoch, best_val_mse) = stopper.best();
    let record = RunRecord {
        stopped_epoch: epochs.len(),
        epochs,
        best_epoch,
        best_val_mse,
        early_stopped,
        total_steps,
        train_samples: refs.len(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok((best, record))
}
