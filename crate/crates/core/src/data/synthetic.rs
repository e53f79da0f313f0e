use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dataset::{SeriesDataset, SplitConvention};
use crate::error::{Error, Result};
use crate::numcore::{Rng, Tensor2};

/// Lowest and highest frequency (cycles per step) of randomly drawn
/// sinusoids: periods between 48 and 8 steps, so a 96-step lookback always
/// holds at least two full cycles of every component.
pub const FREQ_BAND: (f64, f64) = (1.0 / 48.0, 1.0 / 8.0);
/// Randomly drawn amplitudes are uniform on this interval.
pub const AMPLITUDE_RANGE: (f64, f64) = (0.5, 1.5);
pub const DEFAULT_SLOPE: f64 = 0.002;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Sine,
    /// Sine plus a cosine of a second frequency.
    SineMix,
    /// [`SyntheticKind::SineMix`] plus a linear trend.
    SinePlusTrend,
    /// Sum of `k` random sinusoids.
    KSinusoids,
    /// Sine plus a triangle wave of a second frequency.
    SineTriangle,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    #[default]
    Sine,
    /// Piecewise-linear wave with the same period, peak and zero crossings as the sine.
    Triangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// Cycles per step.
    pub frequency: f64,
    pub phase: f64,
    #[serde(default)]
    pub shape: Waveform,
}

/// `x_t = Σ A sin(2π f t + φ) + slope·t + noise·ε_t`, `t = 0..length`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub length: usize,
    pub components: Vec<Sinusoid>,
    pub slope: f64,
    pub noise_std: f64,
    /// Seeds the noise (and, for the random constructors, the components).
    pub seed: u64,
}

fn draw(rng: &mut Rng) -> Sinusoid {
    Sinusoid {
        amplitude: rng.uniform_range(AMPLITUDE_RANGE.0, AMPLITUDE_RANGE.1),
        frequency: rng.uniform_range(FREQ_BAND.0, FREQ_BAND.1),
        phase: rng.uniform_range(0.0, 2.0 * PI),
        shape: Waveform::Sine,
    }
}

impl SyntheticSpec {
    /// Random instance of `kind`; `k` is only used by [`SyntheticKind::KSinusoids`].
    pub fn random(kind: SyntheticKind, length: usize, k: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed).split(0x5157);
        let (count, slope) = match kind {
            SyntheticKind::Sine => (1, 0.0),
            SyntheticKind::SineMix => (2, 0.0),
            SyntheticKind::SinePlusTrend => (2, DEFAULT_SLOPE),
            SyntheticKind::KSinusoids => (k, 0.0),
            SyntheticKind::SineTriangle => (2, 0.0),
        };
        let mut components: Vec<Sinusoid> = (0..count).map(|_| draw(&mut rng)).collect();
        if matches!(kind, SyntheticKind::SineMix | SyntheticKind::SinePlusTrend) {
            // first component a sine, second a cosine
            components[0].phase = 0.0;
            components[1].phase = PI / 2.0;
        }
        if kind == SyntheticKind::SineTriangle {
            components[1].shape = Waveform::Triangle;
        }
        Self {
            kind,
            length,
            components,
            slope,
            noise_std: 0.0,
            seed,
        }
    }

    pub fn with_noise(mut self, std: f64) -> Self {
        self.noise_std = std;
        self
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.slope = slope;
        self
    }

    pub fn name(&self) -> String {
        let kind = match self.kind {
            SyntheticKind::Sine => "sine".to_string(),
            SyntheticKind::SineMix => "sine_mix".to_string(),
            SyntheticKind::SinePlusTrend => "sine_plus_trend".to_string(),
            SyntheticKind::KSinusoids => format!("k{}_sinusoids", self.components.len()),
            SyntheticKind::SineTriangle => "sine_triangle".to_string(),
        };
        format!("synthetic_{kind}_s{}", self.seed)
    }

    /// The noise-free signal value at step `t`.
    pub fn clean_value(&self, t: usize) -> f64 {
        let t = t as f64;
        let periodic: f64 = self
            .components
            .iter()
            .map(|c| {
                let s = (2.0 * PI * c.frequency * t + c.phase).sin();
                c.amplitude
                    * match c.shape {
                        Waveform::Sine => s,
                        Waveform::Triangle => s.asin() * 2.0 / PI,
                    }
            })
            .sum();
        periodic + self.slope * t
    }

    pub fn series(&self) -> Vec<f64> {
        let mut rng = Rng::new(self.seed).split(0x4e01);
        (0..self.length)
            .map(|t| {
                let noise = if self.noise_std > 0.0 {
                    self.noise_std * rng.standard_normal()
                } else {
                    0.0
                };
                self.clean_value(t) + noise
            })
            .collect()
    }
}

/// Univariate dataset with a 70/10/20 split.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SeriesDataset> {
    if spec.length < 10 {
        return Err(Error::config(format!("synthetic length {} is too short", spec.length)));
    }
    if spec.noise_std < 0.0 || !spec.noise_std.is_finite() {
        return Err(Error::config("noise std must be finite and non-negative"));
    }
    let raw = Tensor2::from_vec(spec.length, 1, spec.series())?;
    SeriesDataset::new(spec.name(), vec!["x".into()], raw, SplitConvention::SEVENTY_TEN_TWENTY)
}
