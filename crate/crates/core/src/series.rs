use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled real signal.
///
/// Photocurrent samples are in units where the vacuum-quadrature one-sided PSD is 1,
/// so a white SQL series sampled at `fs` has variance `fs / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    sample_rate: f64,
    samples: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidSeries("sample rate must be positive and finite"));
        }
        if samples.is_empty() {
            return Err(Error::InvalidSeries("series must contain at least one sample"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidSeries("samples must be finite"));
        }
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    /// Constant-valued series.
    pub fn constant(sample_rate: f64, count: usize, value: f64) -> Result<Self> {
        Self::new(sample_rate, vec![value; count])
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn nyquist(&self) -> f64 {
        0.5 * self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Population variance about the sample mean.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Linearly interpolated value at time `t`, clamped to the ends of the series.
    pub fn value_at(&self, t: f64) -> f64 {
        let pos = t * self.sample_rate;
        if pos <= 0.0 {
            return self.samples[0];
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.samples.len() {
            return self.samples[self.samples.len() - 1];
        }
        let frac = pos - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// Sub-series of samples in `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        let end = end.min(self.samples.len());
        if start >= end {
            return Err(Error::InvalidSeries("empty slice"));
        }
        Self::new(self.sample_rate, self.samples[start..end].to_vec())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.sample_rate, self.samples.iter().map(|&s| f(s)).collect())
    }
}
