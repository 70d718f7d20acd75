//! Quantum noise locking of the LO phase.
//!
//! The observable is the homodyne noise power in a band around a fixed analysis frequency,
//! produced sample by sample by a heterodyne band-power detector. It is largest on the
//! anti-squeezed quadrature and smallest on the squeezed one, with period π in LO phase.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, TAU};

use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::engine::{run_lock, DitherPlant, LoopConfig};
use super::result::LockResult;
use crate::detection::HomodyneDetector;
use crate::error::{ensure, Result};
use crate::noise::{gaussian, NoiseScenario};
use crate::physics::SqueezerModel;
use crate::series::TimeSeries;

const DETECTOR_POLES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QnlSettings {
    pub sample_rate: f64,
    /// Center of the band whose noise power is locked.
    pub analysis_center: f64,
    /// Noise bandwidth of the band-power detector.
    pub analysis_rbw: f64,
    /// RMS amplitude of dither-drive pickup in the photocurrent, in the units where the
    /// SQL has unit PSD.
    pub dither_pickup: f64,
}

impl Default for QnlSettings {
    fn default() -> Self {
        Self {
            sample_rate: 1e6,
            analysis_center: 250e3,
            analysis_rbw: 200e3,
            dither_pickup: 2.0,
        }
    }
}

impl QnlSettings {
    pub fn validate(&self) -> Result<()> {
        ensure(self.sample_rate > 0.0, "qnl.sample_rate", self.sample_rate, "must be positive")?;
        ensure(
            self.analysis_rbw > 0.0 && self.analysis_center - self.analysis_rbw / 2.0 > 0.0,
            "qnl.analysis_rbw",
            self.analysis_rbw,
            "band must lie above DC",
        )?;
        ensure(
            self.analysis_center + self.analysis_rbw / 2.0 < self.sample_rate / 2.0,
            "qnl.analysis_center",
            self.analysis_center,
            "band must lie below Nyquist",
        )?;
        ensure(
            self.dither_pickup >= 0.0,
            "qnl.dither_pickup",
            self.dither_pickup,
            "must be non-negative",
        )
    }
}

/// Impulse response of `poles` cascaded one-pole sections with coefficient `alpha`.
fn cascade_impulse(alpha: f64, poles: usize) -> Vec<f64> {
    let mut state = vec![0.0; poles];
    let mut out = Vec::new();
    let mut peak: f64 = 0.0;
    for k in 0.. {
        let mut v = if k == 0 { 1.0 } else { 0.0 };
        for s in &mut state {
            *s += alpha * (v - *s);
            v = *s;
        }
        peak = peak.max(v.abs());
        out.push(v);
        if k > poles && v.abs() < 1e-14 * peak {
            break;
        }
    }
    out
}

/// Smoothing coefficient whose cascade has noise bandwidth `rbw` at `sample_rate`.
fn coefficient_for_bandwidth(rbw: f64, sample_rate: f64, poles: usize) -> f64 {
    let bandwidth = |alpha: f64| sample_rate * cascade_impulse(alpha, poles).iter().map(|h| h * h).sum::<f64>();
    let (mut lo, mut hi) = (1e-9, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if bandwidth(mid) < rbw {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Streaming heterodyne band-power detector on the simulated photocurrent.
pub(crate) struct QnlPlant {
    sample_rate: f64,
    sigma_minus: f64,
    sigma_plus: f64,
    sigma_extra: f64,
    pickup_peak: f64,
    mixer_step: f64,
    index: u64,
    alpha: f64,
    filter: [Complex64; DETECTOR_POLES],
    power_scale: f64,
    squared_impulse: Vec<f64>,
    capture: VecDeque<f64>,
    capture_len: usize,
}

impl QnlPlant {
    pub(crate) fn new(
        source: &SqueezerModel,
        detector: &HomodyneDetector,
        scenario: &NoiseScenario,
        settings: &QnlSettings,
        capture_len: usize,
    ) -> Result<Self> {
        settings.validate()?;
        detector.validate()?;
        scenario.validate()?;
        let fs = settings.sample_rate;
        let fc = settings.analysis_center;
        let pair = source.variances(fc);
        let white = scenario.shot_level * fs / 2.0;
        let extra = detector.technical_relative(scenario, fc) + detector.dark_relative(fc);
        let alpha = coefficient_for_bandwidth(settings.analysis_rbw, fs, DETECTOR_POLES);
        let impulse = cascade_impulse(alpha, DETECTOR_POLES);
        let squared_impulse: Vec<f64> = impulse.iter().map(|h| h * h).collect();
        let sum_h2: f64 = squared_impulse.iter().sum();
        Ok(Self {
            sample_rate: fs,
            sigma_minus: (white * pair.r_minus).sqrt(),
            sigma_plus: (white * pair.r_plus).sqrt(),
            sigma_extra: (white * extra).sqrt(),
            pickup_peak: settings.dither_pickup * std::f64::consts::SQRT_2,
            mixer_step: TAU * fc / fs,
            index: 0,
            alpha,
            filter: [Complex64::new(0.0, 0.0); DETECTOR_POLES],
            // Scale so the observable reads the band noise relative to the SQL.
            power_scale: 1.0 / (white * sum_h2),
            squared_impulse,
            capture: VecDeque::with_capacity(capture_len),
            capture_len,
        })
    }

    pub(crate) fn captured(&self) -> Option<TimeSeries> {
        if self.capture.is_empty() {
            return None;
        }
        TimeSeries::new(self.sample_rate, self.capture.iter().copied().collect()).ok()
    }
}

impl DitherPlant for QnlPlant {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn harmonic(&self) -> f64 {
        2.0
    }

    fn maximum_phase(&self) -> f64 {
        FRAC_PI_2
    }

    fn sample(&mut self, phase: f64, carrier: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let (s, c) = phase.sin_cos();
        let x = self.sigma_minus * gaussian(rng) * c
            + self.sigma_plus * gaussian(rng) * s
            + self.sigma_extra * gaussian(rng)
            + self.pickup_peak * carrier.sin();
        if self.capture_len > 0 {
            if self.capture.len() == self.capture_len {
                self.capture.pop_front();
            }
            self.capture.push_back(x);
        }
        let mix = (self.index as f64 * self.mixer_step) % TAU;
        self.index += 1;
        let mut v = Complex64::from_polar(x, -mix);
        for st in &mut self.filter {
            *st += self.alpha * (v - *st);
            v = *st;
        }
        Ok(v.norm_sqr() * self.power_scale)
    }

    /// Band-power detection turns a variance modulation at `ω` into an observable
    /// modulation weighted by `Σ h_k² e^{-iωk} / Σ h_k²`.
    fn modulation_response(&self, frequency: f64) -> Complex64 {
        let w = TAU * frequency / self.sample_rate;
        let sum: Complex64 = self
            .squared_impulse
            .iter()
            .enumerate()
            .map(|(k, &h2)| Complex64::from_polar(h2, -w * k as f64))
            .sum();
        sum / self.squared_impulse.iter().sum::<f64>()
    }
}

/// Holds the LO phase at a noise-power extremum: the squeezed quadrature for
/// `pid.sign = +1`, the anti-squeezed one for `−1`.
///
/// `capture_samples` full-rate photocurrent samples from the end of the run are returned
/// in `raw_capture`.
#[allow(clippy::too_many_arguments)]
pub fn quantum_noise_lock(
    source: &SqueezerModel,
    detector: &HomodyneDetector,
    scenario: &NoiseScenario,
    settings: &QnlSettings,
    config: &LoopConfig,
    disturbance: &TimeSeries,
    duration: f64,
    capture_samples: usize,
    seed: u64,
) -> Result<LockResult> {
    let mut plant = QnlPlant::new(source, detector, scenario, settings, capture_samples)?;
    let mut result = run_lock(&mut plant, config, config.pid.sign, disturbance, duration, seed)?;
    result.raw_capture = plant.captured();
    Ok(result)
}
