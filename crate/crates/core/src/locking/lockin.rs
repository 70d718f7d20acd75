use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::series::TimeSeries;

fn default_lpf_order() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockInConfig {
    pub mod_frequency: f64,
    /// Phase dither amplitude in radians.
    pub mod_amplitude: f64,
    pub demod_phase: f64,
    pub lpf_cutoff: f64,
    /// Number of cascaded one-pole sections in the output filter.
    #[serde(default = "default_lpf_order")]
    pub lpf_order: usize,
}

impl LockInConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.mod_frequency > 0.0 && self.mod_frequency.is_finite(),
            "lockin.mod_frequency",
            self.mod_frequency,
            "must be positive",
        )?;
        ensure(
            self.mod_amplitude > 0.0 && self.mod_amplitude.is_finite(),
            "lockin.mod_amplitude",
            self.mod_amplitude,
            "must be positive",
        )?;
        ensure(
            self.demod_phase.is_finite(),
            "lockin.demod_phase",
            self.demod_phase,
            "must be finite",
        )?;
        ensure(
            self.lpf_cutoff > 0.0 && self.lpf_cutoff < self.mod_frequency / 2.0,
            "lockin.lpf_cutoff",
            self.lpf_cutoff,
            "must be positive and below half the modulation frequency",
        )?;
        ensure(
            (1..=8).contains(&self.lpf_order),
            "lockin.lpf_order",
            self.lpf_order as f64,
            "must lie in 1..=8",
        )
    }

    /// Time constant of one output filter section.
    pub fn time_constant(&self) -> f64 {
        1.0 / (TAU * self.lpf_cutoff)
    }
}

/// Cascade of identical one-pole low-pass sections.
#[derive(Debug, Clone)]
pub(crate) struct OnePoleCascade {
    alpha: f64,
    state: Vec<f64>,
}

impl OnePoleCascade {
    pub(crate) fn new(cutoff: f64, sample_rate: f64, order: usize) -> Self {
        Self {
            alpha: 1.0 - (-TAU * cutoff / sample_rate).exp(),
            state: vec![0.0; order],
        }
    }

    pub(crate) fn step(&mut self, x: f64) -> f64 {
        let mut v = x;
        for s in &mut self.state {
            *s += self.alpha * (v - *s);
            v = *s;
        }
        v
    }
}

/// Streaming multiply-and-filter demodulator: `y = LPF[2 x(t) sin(2π f t + φ)]`.
#[derive(Debug, Clone)]
pub struct LockIn {
    omega_dt: f64,
    phase: f64,
    index: u64,
    lpf: OnePoleCascade,
}

impl LockIn {
    pub fn new(config: &LockInConfig, sample_rate: f64) -> Result<Self> {
        config.validate()?;
        if sample_rate <= 2.0 * config.mod_frequency {
            return Err(Error::Undersampled {
                sample_rate,
                frequency: config.mod_frequency,
            });
        }
        Ok(Self {
            omega_dt: TAU * config.mod_frequency / sample_rate,
            phase: config.demod_phase,
            index: 0,
            lpf: OnePoleCascade::new(config.lpf_cutoff, sample_rate, config.lpf_order),
        })
    }

    /// Reference phase `2π f t` at the current sample.
    pub fn carrier_phase(&self) -> f64 {
        // Reduce the index modulo a long period to keep the argument small.
        (self.index as f64 * self.omega_dt) % TAU
    }

    pub fn step(&mut self, x: f64) -> f64 {
        let reference = (self.carrier_phase() + self.phase).sin();
        self.index += 1;
        self.lpf.step(2.0 * x * reference)
    }
}

pub fn lock_in_demodulate(signal: &TimeSeries, config: &LockInConfig) -> Result<TimeSeries> {
    let mut lockin = LockIn::new(config, signal.sample_rate())?;
    TimeSeries::new(
        signal.sample_rate(),
        signal.samples().iter().map(|&x| lockin.step(x)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::white_noise;

    fn config(phase: f64) -> LockInConfig {
        LockInConfig {
            mod_frequency: 34e3,
            mod_amplitude: 0.023,
            demod_phase: phase,
            lpf_cutoff: 1e3,
            lpf_order: 2,
        }
    }

    fn tone(fs: f64, n: usize, a: f64, phase: f64) -> TimeSeries {
        TimeSeries::new(
            fs,
            (0..n).map(|i| a * (TAU * 34e3 * i as f64 / fs + phase).sin()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn matched_sinusoid_recovers_amplitude() {
        let fs = 1e6;
        let cfg = config(0.3);
        let settle = (10.0 * cfg.time_constant() * fs) as usize * cfg.lpf_order;
        let y = lock_in_demodulate(&tone(fs, settle + 2000, 0.5, 0.3), &cfg).unwrap();
        let tail = &y.samples()[settle..];
        assert!(tail.iter().all(|v| (v - 0.5).abs() < 0.005));
    }

    #[test]
    fn quadrature_is_rejected() {
        let fs = 1e6;
        let cfg = config(0.3 + std::f64::consts::FRAC_PI_2);
        let settle = (10.0 * cfg.time_constant() * fs) as usize * cfg.lpf_order;
        let y = lock_in_demodulate(&tone(fs, settle + 2000, 0.5, 0.3), &cfg).unwrap();
        assert!(y.samples()[settle..].iter().all(|v| v.abs() < 0.005));
    }

    #[test]
    fn white_noise_is_band_limited() {
        let fs = 1e6;
        let cfg = config(0.0);
        let x = white_noise(fs, 1_000_000, 1.0, 3).unwrap();
        let y = lock_in_demodulate(&x, &cfg).unwrap();
        let settle = 10_000;
        let tail = y.slice(settle, y.len()).unwrap();
        let bound = x.variance() * (2.0 * cfg.lpf_cutoff / (fs / 2.0)) * 4.0;
        assert!(tail.variance() <= bound, "{} > {}", tail.variance(), bound);
    }

    #[test]
    fn undersampled_is_an_error() {
        let x = TimeSeries::constant(50e3, 100, 0.0).unwrap();
        assert!(matches!(
            lock_in_demodulate(&x, &config(0.0)),
            Err(Error::Undersampled { .. })
        ));
    }
}
