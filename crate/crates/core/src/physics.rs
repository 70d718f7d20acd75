//! Closed-form model of a sub-threshold degenerate OPA.
//!
//! All variances are linear and normalized to the vacuum level (SQL = 1). Decibels are
//! power decibels, `10 log10`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Mean intracavity probe photon number per nanowatt of injected probe power.
pub const PHOTONS_PER_NANOWATT: f64 = 0.0764;

/// Cavity and pump description of the OPA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpaParams {
    /// Output coupler transmittance `T`.
    pub output_coupler_t: f64,
    /// Round-trip intracavity loss `L`.
    pub intracavity_loss: f64,
    /// Round-trip length in meters.
    pub round_trip_length: f64,
    /// Pump power in mW.
    pub pump_power: f64,
    /// Oscillation threshold in mW.
    pub threshold_power: f64,
    /// Fundamental wavelength in nm.
    pub wavelength: f64,
}

impl Default for OpaParams {
    /// The cesium D2 operating point: T = 0.11, escape efficiency 0.879, 407 mm ring,
    /// 100 mW pump against a 165 mW threshold.
    fn default() -> Self {
        Self {
            output_coupler_t: 0.11,
            intracavity_loss: loss_for_escape_efficiency(0.11, 0.879),
            round_trip_length: 0.407,
            pump_power: 100.0,
            threshold_power: 165.0,
            wavelength: 852.3,
        }
    }
}

/// Intracavity loss that yields escape efficiency `rho` for output coupling `t`.
pub fn loss_for_escape_efficiency(t: f64, rho: f64) -> f64 {
    t * (1.0 - rho) / rho
}

impl OpaParams {
    pub fn validate(&self) -> Result<()> {
        let t = self.output_coupler_t;
        ensure(t > 0.0 && t < 1.0, "output_coupler_t", t, "must lie in (0, 1)")?;
        ensure(
            self.intracavity_loss >= 0.0 && self.intracavity_loss.is_finite(),
            "intracavity_loss",
            self.intracavity_loss,
            "must be non-negative",
        )?;
        ensure(
            self.round_trip_length > 0.0 && self.round_trip_length.is_finite(),
            "round_trip_length",
            self.round_trip_length,
            "must be positive",
        )?;
        ensure(
            self.threshold_power > 0.0 && self.threshold_power.is_finite(),
            "threshold_power",
            self.threshold_power,
            "must be positive",
        )?;
        ensure(
            self.pump_power >= 0.0,
            "pump_power",
            self.pump_power,
            "must be non-negative",
        )?;
        if self.pump_power >= self.threshold_power {
            return Err(Error::AboveThreshold {
                pump_mw: self.pump_power,
                threshold_mw: self.threshold_power,
            });
        }
        ensure(
            self.wavelength > 0.0,
            "wavelength",
            self.wavelength,
            "must be positive",
        )
    }

    pub fn with_pump_power(&self, pump_power: f64) -> Self {
        Self {
            pump_power,
            ..self.clone()
        }
    }

    /// Free spectral range `c / l` in Hz.
    pub fn free_spectral_range(&self) -> f64 {
        SPEED_OF_LIGHT / self.round_trip_length
    }
}

/// Detection efficiencies downstream of the cavity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionChain {
    pub quantum_efficiency: f64,
    pub visibility: f64,
    pub propagation_efficiency: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self {
            quantum_efficiency: 0.990,
            visibility: 0.985,
            propagation_efficiency: 0.912,
        }
    }
}

impl DetectionChain {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("quantum_efficiency", self.quantum_efficiency),
            ("visibility", self.visibility),
            ("propagation_efficiency", self.propagation_efficiency),
        ] {
            ensure(v > 0.0 && v <= 1.0, name, v, "must lie in (0, 1]")?;
        }
        Ok(())
    }

    /// `η ξ² ζ ρ`.
    pub fn total_efficiency(&self, escape_efficiency: f64) -> f64 {
        self.quantum_efficiency
            * self.visibility
            * self.visibility
            * self.propagation_efficiency
            * escape_efficiency
    }
}

/// Squeezed (`r_minus`) and anti-squeezed (`r_plus`) quadrature variances, SQL = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureVariancePair {
    pub r_minus: f64,
    pub r_plus: f64,
}

impl QuadratureVariancePair {
    pub fn new(r_minus: f64, r_plus: f64) -> Result<Self> {
        ensure(
            r_minus > 0.0 && r_minus.is_finite(),
            "r_minus",
            r_minus,
            "variance must be positive",
        )?;
        ensure(
            r_plus > 0.0 && r_plus.is_finite(),
            "r_plus",
            r_plus,
            "variance must be positive",
        )?;
        Ok(Self { r_minus, r_plus })
    }

    pub fn from_db(squeezing_db: f64, anti_squeezing_db: f64) -> Result<Self> {
        Self::new(from_db(squeezing_db), from_db(anti_squeezing_db))
    }

    pub fn squeezing_db(&self) -> f64 {
        10.0 * self.r_minus.log10()
    }

    pub fn anti_squeezing_db(&self) -> f64 {
        10.0 * self.r_plus.log10()
    }

    /// Noise variance seen at quadrature angle `theta` measured from the squeezed axis.
    pub fn at_angle(&self, theta: f64) -> f64 {
        let s = theta.sin();
        let s2 = s * s;
        self.r_minus + s2 * (self.r_plus - self.r_minus)
    }
}

/// RMS fluctuation of the squeezing angle relative to the detection quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseJitter {
    pub rms: f64,
}

impl PhaseJitter {
    pub fn new(rms: f64) -> Result<Self> {
        ensure(
            rms >= 0.0 && rms.is_finite(),
            "phase_jitter_rms",
            rms,
            "must be non-negative",
        )?;
        Ok(Self { rms })
    }

    /// Whether the jitter leaves the squeezed quadrature identifiable.
    pub fn is_lockable(&self) -> bool {
        self.rms < FRAC_PI_2
    }
}

/// `γ = c (T + L) / l` in s⁻¹, with no 2π factor.
pub fn cavity_decay_rate(params: &OpaParams) -> Result<f64> {
    params.validate()?;
    let total = params.output_coupler_t + params.intracavity_loss;
    if total <= 0.0 {
        return Err(Error::DegenerateCavity);
    }
    Ok(SPEED_OF_LIGHT * total / params.round_trip_length)
}

/// `x = sqrt(P / P_th)`.
pub fn normalized_pump(params: &OpaParams) -> Result<f64> {
    if params.pump_power >= params.threshold_power {
        return Err(Error::AboveThreshold {
            pump_mw: params.pump_power,
            threshold_mw: params.threshold_power,
        });
    }
    params.validate()?;
    Ok((params.pump_power / params.threshold_power).sqrt())
}

/// `ρ = T / (T + L)`.
pub fn escape_efficiency(params: &OpaParams) -> Result<f64> {
    let total = params.output_coupler_t + params.intracavity_loss;
    if total <= 0.0 {
        return Err(Error::DegenerateCavity);
    }
    params.validate()?;
    Ok(params.output_coupler_t / total)
}

/// Source of squeezed vacuum described by normalized pump, total detection efficiency
/// and cavity decay rate.
///
/// Built either from physical parameters or calibrated against an observed
/// squeezing/anti-squeezing pair while keeping the physical decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezerModel {
    pub normalized_pump: f64,
    pub total_efficiency: f64,
    pub decay_rate: f64,
}

impl SqueezerModel {
    pub fn new(normalized_pump: f64, total_efficiency: f64, decay_rate: f64) -> Result<Self> {
        if normalized_pump >= 1.0 {
            return Err(Error::AboveThreshold {
                pump_mw: normalized_pump * normalized_pump,
                threshold_mw: 1.0,
            });
        }
        ensure(
            normalized_pump >= 0.0,
            "normalized_pump",
            normalized_pump,
            "must lie in [0, 1)",
        )?;
        ensure(
            total_efficiency > 0.0 && total_efficiency <= 1.0,
            "total_efficiency",
            total_efficiency,
            "must lie in (0, 1]",
        )?;
        ensure(
            decay_rate > 0.0 && decay_rate.is_finite(),
            "decay_rate",
            decay_rate,
            "must be positive",
        )?;
        Ok(Self {
            normalized_pump,
            total_efficiency,
            decay_rate,
        })
    }

    pub fn from_physical(params: &OpaParams, chain: &DetectionChain) -> Result<Self> {
        chain.validate()?;
        let x = normalized_pump(params)?;
        let rho = escape_efficiency(params)?;
        let gamma = cavity_decay_rate(params)?;
        Self::new(x, chain.total_efficiency(rho), gamma)
    }

    /// Same source with the pump blocked.
    pub fn pump_off(&self) -> Self {
        Self {
            normalized_pump: 0.0,
            ..*self
        }
    }

    pub fn variances(&self, frequency: f64) -> QuadratureVariancePair {
        let x = self.normalized_pump;
        let omega = frequency / self.decay_rate;
        let four_omega2 = 4.0 * omega * omega;
        let gain = self.total_efficiency * 4.0 * x;
        QuadratureVariancePair {
            r_minus: 1.0 - gain / ((1.0 + x) * (1.0 + x) + four_omega2),
            r_plus: 1.0 + gain / ((1.0 - x) * (1.0 - x) + four_omega2),
        }
    }
}

/// Squeezing and anti-squeezing at analysis frequency `frequency` (Hz).
pub fn squeezing_spectrum(
    params: &OpaParams,
    chain: &DetectionChain,
    frequency: f64,
) -> Result<QuadratureVariancePair> {
    ensure(
        frequency >= 0.0 && frequency.is_finite(),
        "frequency",
        frequency,
        "must be non-negative",
    )?;
    Ok(SqueezerModel::from_physical(params, chain)?.variances(frequency))
}

/// Mixes the quadratures by an RMS angle error: `R'± = R± cos² θ + R∓ sin² θ`.
pub fn apply_phase_jitter(pair: QuadratureVariancePair, jitter: PhaseJitter) -> QuadratureVariancePair {
    let s = jitter.rms.sin();
    let mix = s * s * (pair.r_plus - pair.r_minus);
    QuadratureVariancePair {
        r_minus: pair.r_minus + mix,
        r_plus: pair.r_plus - mix,
    }
}

/// Classical phase-sensitive power gain of a seed at pump phase `pump_phase`.
///
/// `G(0) = 1/(1-x)²` (amplification), `G(π) = 1/(1+x)²` (deamplification).
pub fn parametric_power_gain(x: f64, pump_phase: f64) -> Result<f64> {
    if x >= 1.0 {
        return Err(Error::AboveThreshold {
            pump_mw: x * x,
            threshold_mw: 1.0,
        });
    }
    ensure(x >= 0.0, "normalized_pump", x, "must lie in [0, 1)")?;
    let c = (0.5 * pump_phase).cos();
    let s = (0.5 * pump_phase).sin();
    Ok(c * c / ((1.0 - x) * (1.0 - x)) + s * s / ((1.0 + x) * (1.0 + x)))
}

/// Mean probe photon number inside the cavity, linear in injected power (nW).
pub fn mean_intracavity_photons(probe_power_nw: f64) -> Result<f64> {
    ensure(
        probe_power_nw >= 0.0 && probe_power_nw.is_finite(),
        "probe_power",
        probe_power_nw,
        "must be non-negative",
    )?;
    Ok(PHOTONS_PER_NANOWATT * probe_power_nw)
}

pub fn to_db(linear: f64) -> Result<f64> {
    if linear > 0.0 && linear.is_finite() {
        Ok(10.0 * linear.log10())
    } else {
        Err(Error::NonPositiveLinear(linear))
    }
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
