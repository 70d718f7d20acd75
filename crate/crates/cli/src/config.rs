//! Scenario configuration: one JSON document covering the source, detection, noise, locks
//! and the settings of every figure scenario.

use std::path::Path;

use opatwin_core::analyzer::{AnalyzerMode, SpectrumConfig};
use opatwin_core::detection::{HomodyneDetector, SpcmChannel};
use opatwin_core::inference::{fit_opa_operating_point, MeasurementPair};
use opatwin_core::locking::{LoopConfig, QnlSettings, SmlSettings};
use opatwin_core::noise::{NoiseScenario, TechnicalNoise};
use opatwin_core::physics::{cavity_decay_rate, DetectionChain, OpaParams, SqueezerModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value at `{path}`: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.to_string(),
    }
}

fn at<T>(path: &str, r: opatwin_core::Result<T>) -> Result<T, ConfigError> {
    r.map_err(|e| invalid(path, e))
}

fn require(path: &str, cond: bool, message: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(invalid(path, message))
    }
}

/// Squeezing/anti-squeezing levels the source is calibrated to, observed at `pump_power`.
///
/// The calibrated source keeps the cavity decay rate of `opa`; its normalized pump scales
/// as the square root of `opa.pump_power / pump_power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub squeezing_db: f64,
    pub anti_squeezing_db: f64,
    pub pump_power: f64,
}

/// Residual squeezing-angle jitter left by the locks, applied to locked homodyne traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterConfig {
    pub rms: f64,
    pub corner_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpOperatingPoint {
    /// mW
    pub pump_power: f64,
    /// nW
    pub probe_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocksConfig {
    pub lo: LoopConfig,
    pub pump: LoopConfig,
    pub lo_plant: QnlSettings,
    pub pump_plant: SmlSettings,
    pub pump_target_zero: PumpOperatingPoint,
    pub pump_target_pi: PumpOperatingPoint,
    /// Diffusion of the free-running phase disturbance, rad²/s.
    pub disturbance_diffusion: f64,
    /// Display rebinning of the count-rate trace, s.
    pub display_bin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub sample_rate: f64,
    pub record_duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FftWindow {
    pub start: f64,
    pub stop: f64,
    pub rbw: f64,
    pub vbw: f64,
    pub sample_rate: f64,
    pub averages: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumScenario {
    pub windows: Vec<FftWindow>,
    /// Band summarized as the broadband squeezing level, Hz.
    pub flat_band: [f64; 2],
    /// Bins within this distance of a configured tone are left out of the summary, Hz.
    pub tone_guard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroSpanPoint {
    pub center: f64,
    pub rbw: f64,
    pub vbw: f64,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroSpanScenario {
    pub points: Vec<ZeroSpanPoint>,
    pub record_duration: f64,
    pub averages: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityScenario {
    pub duration: f64,
    pub center: f64,
    pub rbw: f64,
    pub vbw: f64,
    pub sample_rate: f64,
    /// Length of each synthesized record, s.
    pub block_duration: f64,
    /// Spacing of the logged squeezing points, s.
    pub point_interval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Hold time of the lock demonstration after the scan, s.
    pub duration: f64,
    pub opa: OpaParams,
    pub chain: DetectionChain,
    pub calibration: Option<Calibration>,
    pub detector: HomodyneDetector,
    pub spcm: SpcmChannel,
    pub noise: NoiseScenario,
    pub jitter: JitterConfig,
    pub locks: LocksConfig,
    /// Zero-span analyzer settings of the phase sweep.
    pub analyzer: SpectrumConfig,
    pub sweep: SweepConfig,
    pub spectrum: SpectrumScenario,
    pub zero_span: ZeroSpanScenario,
    pub stability: StabilityScenario,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            duration: 100.0,
            opa: OpaParams::default(),
            chain: DetectionChain::default(),
            calibration: Some(Calibration {
                squeezing_db: -5.70,
                anti_squeezing_db: 13.68,
                pump_power: 100.0,
            }),
            detector: HomodyneDetector::default(),
            spcm: SpcmChannel::default(),
            noise: NoiseScenario {
                shot_level: 1.0,
                technical_noise: TechnicalNoise {
                    corner_frequency: 10.0,
                    slope_alpha: 2.0,
                    level_at_corner: 1.5e5,
                },
                tones: NoiseScenario::spurious_tones(),
                seed: 0,
            },
            jitter: JitterConfig {
                rms: 0.018,
                corner_frequency: 1.0,
            },
            locks: LocksConfig {
                lo: LoopConfig::quantum_noise_default(),
                pump: LoopConfig::sml_default(),
                lo_plant: QnlSettings::default(),
                pump_plant: SmlSettings::default(),
                pump_target_zero: PumpOperatingPoint {
                    pump_power: 100.0,
                    probe_power: 3.0,
                },
                pump_target_pi: PumpOperatingPoint {
                    pump_power: 90.0,
                    probe_power: 4.5,
                },
                disturbance_diffusion: 1e-5,
                display_bin: 0.02,
            },
            analyzer: SpectrumConfig::zero_span(5e3, 2e3, 30.0, 10),
            sweep: SweepConfig {
                sample_rate: 50e3,
                record_duration: 2.0,
            },
            spectrum: SpectrumScenario {
                windows: vec![
                    FftWindow {
                        start: 10.0,
                        stop: 1e3,
                        rbw: 1.0,
                        vbw: 1.0,
                        sample_rate: 4e3,
                        averages: 20,
                    },
                    FftWindow {
                        start: 1e3,
                        stop: 300e3,
                        rbw: 2.0,
                        vbw: 2.0,
                        sample_rate: 800e3,
                        averages: 4,
                    },
                ],
                flat_band: [200.0, 200e3],
                tone_guard: 10.0,
            },
            zero_span: ZeroSpanScenario {
                points: vec![
                    ZeroSpanPoint {
                        center: 10.0,
                        rbw: 5.0,
                        vbw: 1.0,
                        sample_rate: 200.0,
                    },
                    ZeroSpanPoint {
                        center: 70.0,
                        rbw: 30.0,
                        vbw: 1.0,
                        sample_rate: 1e3,
                    },
                ],
                record_duration: 10.0,
                averages: 400,
            },
            stability: StabilityScenario {
                duration: 600.0,
                center: 10e3,
                rbw: 3e3,
                vbw: 1.0,
                sample_rate: 32e3,
                block_duration: 10.0,
                point_interval: 1.0,
            },
        }
    }
}

impl ScenarioConfig {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config = Self::from_json(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })?;
        Ok(config)
    }

    /// Parses and validates a JSON document. Parse errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: "<config>".into(),
            message: format!("at `{}`: {}", e.path(), e.inner()),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// SHA-256 of the compact serialization, as embedded in output headers.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("configuration serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        require("duration", self.duration > 0.0 && self.duration.is_finite(), "must be positive")?;
        at("opa", self.opa.validate())?;
        at("chain", self.chain.validate())?;
        at("detector", self.detector.validate())?;
        at("spcm", self.spcm.validate())?;
        at("noise", self.noise.validate())?;
        self.source()?;

        require("jitter.rms", self.jitter.rms >= 0.0 && self.jitter.rms < 0.5, "must lie in [0, 0.5) rad")?;
        require(
            "jitter.corner_frequency",
            self.jitter.corner_frequency > 0.0,
            "must be positive",
        )?;

        let l = &self.locks;
        at("locks.lo", l.lo.validate())?;
        at("locks.pump", l.pump.validate())?;
        at("locks.lo_plant", l.lo_plant.validate())?;
        at("locks.pump_plant", l.pump_plant.validate())?;
        for (name, op) in [
            ("locks.pump_target_zero", &l.pump_target_zero),
            ("locks.pump_target_pi", &l.pump_target_pi),
        ] {
            at(name, self.opa.with_pump_power(op.pump_power).validate())?;
            require(
                &format!("{name}.probe_power"),
                op.probe_power >= 0.0 && op.probe_power.is_finite(),
                "must be non-negative",
            )?;
        }
        require(
            "locks.disturbance_diffusion",
            l.disturbance_diffusion >= 0.0,
            "must be non-negative",
        )?;
        require("locks.display_bin", l.display_bin > 0.0, "must be positive")?;

        at("analyzer", self.analyzer.validate())?;
        require(
            "analyzer.mode",
            self.analyzer.mode == AnalyzerMode::ZeroSpan,
            "the phase sweep uses the zero_span mode",
        )?;
        require("sweep.sample_rate", self.sweep.sample_rate > 0.0, "must be positive")?;
        require(
            "analyzer.start_or_center",
            self.analyzer.start_or_center + self.analyzer.rbw / 2.0 < self.sweep.sample_rate / 2.0,
            "band must lie below the sweep Nyquist frequency",
        )?;
        require(
            "sweep.record_duration",
            self.sweep.record_duration * self.analyzer.vbw >= 2.0,
            "must cover at least two video time constants",
        )?;

        require("spectrum.windows", !self.spectrum.windows.is_empty(), "needs at least one window")?;
        for (i, w) in self.spectrum.windows.iter().enumerate() {
            let path = format!("spectrum.windows[{i}]");
            at(&path, SpectrumConfig::fft(w.start, w.stop, w.rbw, w.vbw, w.averages).validate())?;
            require(&format!("{path}.stop"), w.stop < w.sample_rate / 2.0, "must lie below Nyquist")?;
        }
        let [lo, hi] = self.spectrum.flat_band;
        require("spectrum.flat_band", 0.0 < lo && lo < hi, "must be an increasing pair of positive frequencies")?;
        require("spectrum.tone_guard", self.spectrum.tone_guard >= 0.0, "must be non-negative")?;

        require("zero_span.points", !self.zero_span.points.is_empty(), "needs at least one point")?;
        for (i, p) in self.zero_span.points.iter().enumerate() {
            let path = format!("zero_span.points[{i}]");
            at(&path, SpectrumConfig::zero_span(p.center, p.rbw, p.vbw, 1).validate())?;
            require(
                &format!("{path}.center"),
                p.center > p.rbw / 2.0 && p.center + p.rbw / 2.0 < p.sample_rate / 2.0,
                "band must lie between DC and Nyquist",
            )?;
        }
        require(
            "zero_span.record_duration",
            self.zero_span.record_duration > 0.0,
            "must be positive",
        )?;
        require("zero_span.averages", self.zero_span.averages >= 1, "must be at least 1")?;

        let s = &self.stability;
        at("stability", SpectrumConfig::zero_span(s.center, s.rbw, s.vbw, 1).validate())?;
        require(
            "stability.center",
            s.center + s.rbw / 2.0 < s.sample_rate / 2.0,
            "band must lie below Nyquist",
        )?;
        require(
            "stability.point_interval",
            s.point_interval > 0.0 && s.point_interval <= s.block_duration,
            "must be positive and no longer than a block",
        )?;
        require(
            "stability.duration",
            s.duration >= s.block_duration && s.block_duration > 0.0,
            "must cover at least one block",
        )?;
        Ok(())
    }

    /// Squeezed-light source used by every homodyne scenario.
    pub fn source(&self) -> Result<SqueezerModel, ConfigError> {
        let Some(cal) = &self.calibration else {
            return at("opa", SqueezerModel::from_physical(&self.opa, &self.chain));
        };
        require(
            "calibration.pump_power",
            cal.pump_power > 0.0 && cal.pump_power < self.opa.threshold_power,
            "must lie between zero and the threshold",
        )?;
        let fit = at(
            "calibration",
            fit_opa_operating_point(&MeasurementPair::new(cal.squeezing_db, cal.anti_squeezing_db, 0.0)),
        )?;
        let x = fit.normalized_pump * (self.opa.pump_power / cal.pump_power).sqrt();
        let gamma = at("opa", cavity_decay_rate(&self.opa))?;
        at("opa.pump_power", SqueezerModel::new(x, fit.total_efficiency, gamma))
    }

    /// Applies `--scale`: simulated durations and averaged record counts shrink or grow
    /// together. Counts never drop below one.
    pub fn scaled(&self, factor: f64) -> Self {
        let count = |n: usize| ((n as f64 * factor).round() as usize).max(1);
        let mut c = self.clone();
        c.duration *= factor;
        c.analyzer.averages = count(c.analyzer.averages);
        for w in &mut c.spectrum.windows {
            w.averages = count(w.averages);
        }
        c.zero_span.averages = count(c.zero_span.averages);
        c.stability.duration = (c.stability.duration * factor).max(c.stability.block_duration);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert_eq!(ScenarioConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn calibrated_source_reproduces_pair() {
        let pair = ScenarioConfig::default().source().unwrap().variances(0.0);
        assert!((pair.squeezing_db() + 5.70).abs() < 1e-6);
        assert!((pair.anti_squeezing_db() - 13.68).abs() < 1e-6);
    }

    #[test]
    fn pump_off_gives_vacuum() {
        let mut c = ScenarioConfig::default();
        c.opa.pump_power = 0.0;
        let pair = c.source().unwrap().variances(5e3);
        assert_eq!((pair.r_minus, pair.r_plus), (1.0, 1.0));
    }

    #[test]
    fn above_threshold_is_rejected_with_path() {
        let mut c = ScenarioConfig::default();
        c.opa.pump_power = 200.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("`opa`"), "{msg}");
    }

    #[test]
    fn unknown_field_names_its_path() {
        let text = ScenarioConfig::default().to_json().replacen("\"rbw\"", "\"rbw_hz\"", 1);
        let msg = ScenarioConfig::from_json(&text).unwrap_err().to_string();
        assert!(msg.contains("rbw_hz"), "{msg}");
    }

    #[test]
    fn nested_errors_carry_field_paths() {
        let mut c = ScenarioConfig::default();
        c.locks.pump.pid.ki = -1.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("locks.pump") && msg.contains("ki"), "{msg}");

        let mut c = ScenarioConfig::default();
        c.zero_span.points[1].sample_rate = 100.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("zero_span.points[1].center"), "{msg}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn scaling_keeps_counts_positive() {
        let c = ScenarioConfig::default().scaled(0.001);
        assert_eq!(c.zero_span.averages, 1);
        assert!(c.duration > 0.0);
        c.validate().unwrap();
    }
}
