//! Single-photon modulation locking of the pump phase.
//!
//! The observable is the SPCM count rate. Interference between parametric fluorescence and
//! the amplified probe makes it a `cos φ` fringe in pump phase: maximum at `φ = 0`
//! (amplification), minimum at `φ = π` (deamplification).

use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{run_lock, DitherPlant, LoopConfig};
use super::result::LockResult;
use crate::detection::{count_rate_model, poisson_draw, SpcmChannel};
use crate::error::{ensure, Result};
use crate::physics::OpaParams;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmlTarget {
    /// Fringe maximum, parametric amplification.
    Zero,
    /// Fringe minimum, parametric deamplification.
    Pi,
}

impl SmlTarget {
    /// Sign the controller needs to hold this extremum.
    pub fn polarity(self) -> f64 {
        match self {
            SmlTarget::Zero => -1.0,
            SmlTarget::Pi => 1.0,
        }
    }

    pub fn phase(self) -> f64 {
        match self {
            SmlTarget::Zero => 0.0,
            SmlTarget::Pi => PI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmlSettings {
    pub sample_rate: f64,
    /// Multiplies every count rate; large values approach the noiseless limit.
    pub rate_multiplier: f64,
}

impl Default for SmlSettings {
    fn default() -> Self {
        Self {
            sample_rate: 500e3,
            rate_multiplier: 1.0,
        }
    }
}

impl SmlSettings {
    pub fn validate(&self) -> Result<()> {
        ensure(self.sample_rate > 0.0, "sml.sample_rate", self.sample_rate, "must be positive")?;
        ensure(
            self.rate_multiplier > 0.0 && self.rate_multiplier.is_finite(),
            "sml.rate_multiplier",
            self.rate_multiplier,
            "must be positive",
        )
    }
}

/// Poisson-counting plant with rate `mean + swing · cos φ`.
pub(crate) struct SmlPlant {
    sample_rate: f64,
    mean: f64,
    swing: f64,
    index: usize,
}

impl SmlPlant {
    pub(crate) fn new(params: &OpaParams, probe_power: f64, spcm: &SpcmChannel, settings: &SmlSettings) -> Result<Self> {
        settings.validate()?;
        let at_zero = count_rate_model(params, probe_power, 0.0, spcm)?;
        let at_pi = count_rate_model(params, probe_power, PI, spcm)?;
        Ok(Self {
            sample_rate: settings.sample_rate,
            mean: settings.rate_multiplier * 0.5 * (at_zero + at_pi),
            swing: settings.rate_multiplier * 0.5 * (at_zero - at_pi),
            index: 0,
        })
    }
}

impl DitherPlant for SmlPlant {
    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn harmonic(&self) -> f64 {
        1.0
    }

    fn maximum_phase(&self) -> f64 {
        0.0
    }

    fn sample(&mut self, phase: f64, _carrier: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let rate = self.mean + self.swing * phase.cos();
        let counts = poisson_draw(rate, 1.0 / self.sample_rate, self.index, rng)?;
        self.index += 1;
        Ok(counts as f64 * self.sample_rate)
    }
}

/// Holds the pump phase at the count-rate fringe maximum (`Zero`) or minimum (`Pi`).
///
/// The controller sign is `pid.sign` times the target polarity.
#[allow(clippy::too_many_arguments)]
pub fn sml_lock(
    params: &OpaParams,
    probe_power: f64,
    spcm: &SpcmChannel,
    settings: &SmlSettings,
    config: &LoopConfig,
    target: SmlTarget,
    disturbance: &TimeSeries,
    duration: f64,
    seed: u64,
) -> Result<LockResult> {
    let mut plant = SmlPlant::new(params, probe_power, spcm, settings)?;
    run_lock(
        &mut plant,
        config,
        config.pid.sign * target.polarity(),
        disturbance,
        duration,
        seed,
    )
}
