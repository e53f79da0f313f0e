use serde::{Deserialize, Serialize};

use super::dataset::{SeriesDataset, Split};
use crate::error::{Error, Result};
use crate::numcore::Tensor2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    /// Built from the time-reversed `(L+H)` segment.
    Reversed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionPolicy {
    ForwardOnly,
    /// Every forward pair is followed by its reversed twin. Only honoured on
    /// the train split.
    Bidirectional,
}

/// Position of one training example: the segment `[origin, origin + L + H)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowRef {
    pub origin: usize,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowPair {
    /// `L × C`
    pub input: Tensor2,
    /// `H × C`
    pub target: Tensor2,
    pub origin: usize,
    pub direction: Direction,
}

/// Start indices of every input window whose targets lie in `split`.
///
/// Training windows stay inside the train rows: `train_len − L − H + 1`
/// origins. Validation and test windows may take their lookback from
/// earlier rows, so every target index of the split is forecast:
/// `len − H + 1` origins, the first input ending at the split boundary.
pub fn window_origins(ds: &SeriesDataset, split: Split, lookback: usize, horizon: usize) -> Result<Vec<usize>> {
    let range = ds.split_range(split);
    let need = lookback + horizon;
    match split {
        Split::Train => {
            if range.len() < need {
                return Err(Error::config(format!(
                    "train split has {} rows, L+H = {need} needed",
                    range.len()
                )));
            }
            Ok((range.start..=range.end - need).collect())
        }
        Split::Val | Split::Test => {
            if range.len() < horizon {
                return Err(Error::config(format!("{split:?} split has {} rows, H = {horizon} needed", range.len())));
            }
            if range.start < lookback {
                return Err(Error::config(format!(
                    "{split:?} split starts at row {} but L = {lookback} rows of history are needed",
                    range.start
                )));
            }
            Ok((range.start - lookback..=range.end - need).collect())
        }
    }
}

/// Training examples in origin order; reversed twins only on the train split.
pub fn window_refs(
    ds: &SeriesDataset,
    split: Split,
    lookback: usize,
    horizon: usize,
    policy: DirectionPolicy,
) -> Result<Vec<WindowRef>> {
    let origins = window_origins(ds, split, lookback, horizon)?;
    let both = policy == DirectionPolicy::Bidirectional && split == Split::Train;
    let mut refs = Vec::with_capacity(origins.len() * if both { 2 } else { 1 });
    for origin in origins {
        refs.push(WindowRef {
            origin,
            direction: Direction::Forward,
        });
        if both {
            refs.push(WindowRef {
                origin,
                direction: Direction::Reversed,
            });
        }
    }
    Ok(refs)
}

/// The `(L+H) × C` segment of a window in the requested direction.
pub fn segment(ds: &SeriesDataset, w: WindowRef, lookback: usize, horizon: usize) -> Tensor2 {
    let seg = ds.values.slice_rows(w.origin, w.origin + lookback + horizon);
    match w.direction {
        Direction::Forward => seg,
        Direction::Reversed => crate::train::reverse_time(&seg),
    }
}

pub fn make_pair(ds: &SeriesDataset, w: WindowRef, lookback: usize, horizon: usize) -> WindowPair {
    let seg = segment(ds, w, lookback, horizon);
    WindowPair {
        input: seg.slice_rows(0, lookback),
        target: seg.slice_rows(lookback, lookback + horizon),
        origin: w.origin,
        direction: w.direction,
    }
}

/// Lazily materialized pairs for `split`.
pub fn windows(
    ds: &SeriesDataset,
    split: Split,
    lookback: usize,
    horizon: usize,
    policy: DirectionPolicy,
) -> Result<impl Iterator<Item = WindowPair> + '_> {
    let refs = window_refs(ds, split, lookback, horizon, policy)?;
    Ok(refs.into_iter().map(move |w| make_pair(ds, w, lookback, horizon)))
}

/// Stacks windows in row layout: window `b`, channel `c` becomes row
/// `b·C + c`. Returns `(inputs (B·C)×L, targets (B·C)×H)`.
pub fn assemble_rows(ds: &SeriesDataset, refs: &[WindowRef], lookback: usize, horizon: usize) -> (Tensor2, Tensor2) {
    let c = ds.channels();
    let mut x = Tensor2::zeros(refs.len() * c, lookback);
    let mut y = Tensor2::zeros(refs.len() * c, horizon);
    for (b, w) in refs.iter().enumerate() {
        let len = lookback + horizon;
        for ch in 0..c {
            let r = b * c + ch;
            for s in 0..len {
                let t = match w.direction {
                    Direction::Forward => w.origin + s,
                    Direction::Reversed => w.origin + len - 1 - s,
                };
                let v = ds.values.get(t, ch);
                if s < lookback {
                    x.set(r, s, v);
                } else {
                    y.set(r, s - lookback, v);
                }
            }
        }
    }
    (x, y)
}
