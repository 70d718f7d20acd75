//! Balanced homodyne detector and single-photon counting channel.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::noise::{derive_seed, rng, shaped_noise, tone_samples, NoiseScenario};
use crate::physics::{normalized_pump, parametric_power_gain, OpaParams, SqueezerModel};
use crate::series::TimeSeries;

/// LO power at which the dark-noise levels are quoted, in mW.
pub const REFERENCE_LO_POWER_MW: f64 = 2.0;

/// Longest block synthesized in one FFT.
const MAX_BLOCK: usize = 1 << 20;

/// Dark-noise level relative to the SQL of the reference LO, at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkNoisePoint {
    pub frequency: f64,
    pub level_db: f64,
}

/// Piecewise log-linear dark-noise spectrum, held constant beyond the end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkNoiseSpec {
    pub points: Vec<DarkNoisePoint>,
}

impl Default for DarkNoiseSpec {
    /// 7 dB below shot noise at 10 Hz, 10 dB below from 100 Hz up.
    fn default() -> Self {
        Self {
            points: vec![
                DarkNoisePoint {
                    frequency: 10.0,
                    level_db: -7.0,
                },
                DarkNoisePoint {
                    frequency: 100.0,
                    level_db: -10.0,
                },
            ],
        }
    }
}

impl DarkNoiseSpec {
    pub fn none() -> Self {
        Self { points: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.points {
            ensure(
                p.frequency > 0.0 && p.frequency.is_finite(),
                "dark_noise.frequency",
                p.frequency,
                "must be positive",
            )?;
            ensure(p.level_db.is_finite(), "dark_noise.level_db", p.level_db, "must be finite")?;
        }
        for w in self.points.windows(2) {
            ensure(
                w[1].frequency > w[0].frequency,
                "dark_noise.frequency",
                w[1].frequency,
                "points must be strictly increasing in frequency",
            )?;
            ensure(
                w[1].level_db <= w[0].level_db,
                "dark_noise.level_db",
                w[1].level_db,
                "must be non-increasing with frequency",
            )?;
        }
        Ok(())
    }

    /// Level in dB relative to the reference-LO SQL, or `None` without dark noise.
    pub fn level_db(&self, frequency: f64) -> Option<f64> {
        let first = self.points.first()?;
        let last = self.points.last()?;
        if frequency <= first.frequency {
            return Some(first.level_db);
        }
        if frequency >= last.frequency {
            return Some(last.level_db);
        }
        let w = self
            .points
            .windows(2)
            .find(|w| frequency <= w[1].frequency)
            .expect("frequency lies inside the table");
        let t = (frequency.ln() - w[0].frequency.ln()) / (w[1].frequency.ln() - w[0].frequency.ln());
        Some(w[0].level_db + t * (w[1].level_db - w[0].level_db))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomodyneDetector {
    pub lo_power: f64,
    /// Common-mode rejection in dB, frequency independent.
    pub cmrr_db: f64,
    pub dark_noise: DarkNoiseSpec,
}

impl Default for HomodyneDetector {
    fn default() -> Self {
        Self {
            lo_power: REFERENCE_LO_POWER_MW,
            cmrr_db: 55.0,
            dark_noise: DarkNoiseSpec::default(),
        }
    }
}

impl HomodyneDetector {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.lo_power > 0.0 && self.lo_power.is_finite(),
            "detector.lo_power",
            self.lo_power,
            "must be positive",
        )?;
        ensure(
            self.cmrr_db >= 0.0 && self.cmrr_db.is_finite(),
            "detector.cmrr_db",
            self.cmrr_db,
            "must be non-negative",
        )?;
        self.dark_noise.validate()
    }

    pub fn cmrr_linear(&self) -> f64 {
        10f64.powf(self.cmrr_db / 10.0)
    }

    /// Dark noise relative to the SQL at this detector's LO power.
    pub fn dark_relative(&self, frequency: f64) -> f64 {
        self.dark_noise
            .level_db(frequency)
            .map_or(0.0, |db| 10f64.powf(db / 10.0) * REFERENCE_LO_POWER_MW / self.lo_power)
    }

    /// Laser technical noise left after common-mode rejection, relative to the SQL.
    /// Classical noise grows with LO power squared while the SQL grows linearly.
    pub fn technical_relative(&self, scenario: &NoiseScenario, frequency: f64) -> f64 {
        scenario.technical_noise.psd(frequency) * (self.lo_power / REFERENCE_LO_POWER_MW) / self.cmrr_linear()
    }
}

/// Analytic one-sided PSD of the homodyne photocurrent at quadrature angle `theta`
/// (measured from the squeezed axis), excluding tones.
pub fn expected_psd(
    scenario: &NoiseScenario,
    source: &SqueezerModel,
    detector: &HomodyneDetector,
    theta: f64,
    frequency: f64,
) -> f64 {
    let quantum = source.variances(frequency).at_angle(theta);
    scenario.shot_level
        * (quantum + detector.technical_relative(scenario, frequency) + detector.dark_relative(frequency))
}

/// Simulated homodyne photocurrent.
///
/// The two quadratures are synthesized with PSDs `R−(f)` and `R+(f)` and mixed by the
/// instantaneous angle `θ(t)` from `lo_phase`, so the photocurrent PSD follows
/// `R−cos²θ + R+sin²θ` for slowly varying `θ`. Technical leakage, dark noise and the
/// scenario's tones are added on top. Long records are synthesized in independent blocks.
pub fn homodyne_measure(
    scenario: &NoiseScenario,
    source: &SqueezerModel,
    detector: &HomodyneDetector,
    lo_phase: &TimeSeries,
    sample_rate: f64,
    seed: u64,
) -> Result<TimeSeries> {
    scenario.validate()?;
    detector.validate()?;
    if lo_phase.sample_rate() != sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: sample_rate,
            actual: lo_phase.sample_rate(),
        });
    }
    let count = lo_phase.len();
    if count < 2 {
        return Err(Error::SeriesTooShort {
            required: 2,
            actual: count,
        });
    }
    let shot = scenario.shot_level;
    let psd_minus = |f: f64| shot * source.variances(f).r_minus;
    let psd_plus = |f: f64| shot * source.variances(f).r_plus;
    let psd_extra = |f: f64| {
        shot * (detector.technical_relative(scenario, f) + detector.dark_relative(f))
    };
    let theta = lo_phase.samples();
    let mut out = Vec::with_capacity(count);
    for (block, start) in (0..count).step_by(MAX_BLOCK).enumerate() {
        let len = MAX_BLOCK.min(count - start);
        let mut r = rng(derive_seed(seed, block as u64));
        let a = shaped_noise(&psd_minus, sample_rate, len, &mut r)?;
        let b = shaped_noise(&psd_plus, sample_rate, len, &mut r)?;
        let extra = shaped_noise(&psd_extra, sample_rate, len, &mut r)?;
        let tones = tone_samples(
            &scenario.tones,
            sample_rate,
            len,
            start as f64 / sample_rate,
            derive_seed(seed ^ 0x746f_6e65, 0),
        );
        for i in 0..len {
            let (s, c) = theta[start + i].sin_cos();
            out.push(a[i] * c + b[i] * s + extra[i] + tones[i]);
        }
    }
    TimeSeries::new(sample_rate, out)
}

/// Detector output with the signal port blocked and the LO off: dark noise only.
pub fn dark_measure(
    scenario: &NoiseScenario,
    detector: &HomodyneDetector,
    sample_rate: f64,
    count: usize,
    seed: u64,
) -> Result<TimeSeries> {
    detector.validate()?;
    let shot = scenario.shot_level;
    let mut samples = Vec::with_capacity(count);
    for (block, start) in (0..count).step_by(MAX_BLOCK).enumerate() {
        let len = MAX_BLOCK.min(count - start);
        let mut r = rng(derive_seed(seed, block as u64));
        samples.extend(shaped_noise(
            &|f| shot * detector.dark_relative(f),
            sample_rate,
            len,
            &mut r,
        )?);
    }
    TimeSeries::new(sample_rate, samples)
}

/// Count rate with the pump alone at the reference operating point, background included.
pub const PUMP_ONLY_RATE_HZ: f64 = 1.95e6;
/// Probe count rate per nW with the pump off.
pub const PROBE_RATE_PER_NW: f64 = 3.0e4;
/// Pump-to-threshold ratio of the reference operating point.
pub const REFERENCE_PUMP_RATIO: f64 = 100.0 / 165.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpcmChannel {
    pub background_rate: f64,
    pub etalon_transmission: f64,
    pub bin_width: f64,
}

impl Default for SpcmChannel {
    fn default() -> Self {
        Self {
            background_rate: 500.0,
            etalon_transmission: 1.0,
            bin_width: 0.020,
        }
    }
}

impl SpcmChannel {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.background_rate >= 0.0 && self.background_rate.is_finite(),
            "spcm.background_rate",
            self.background_rate,
            "must be non-negative",
        )?;
        ensure(
            self.etalon_transmission > 0.0 && self.etalon_transmission <= 1.0,
            "spcm.etalon_transmission",
            self.etalon_transmission,
            "must lie in (0, 1]",
        )?;
        ensure(
            self.bin_width > 0.0 && self.bin_width.is_finite(),
            "spcm.bin_width",
            self.bin_width,
            "must be positive",
        )
    }

    /// Fluorescence rate coefficient: the pump-only rate at the reference point is
    /// `PUMP_ONLY_RATE_HZ` including background.
    fn fluorescence_scale(&self) -> f64 {
        let r = REFERENCE_PUMP_RATIO;
        (PUMP_ONLY_RATE_HZ - self.background_rate) * (1.0 - r) / r
    }
}

/// SPCM count rate in Hz: background plus etalon-filtered parametric fluorescence and the
/// phase-sensitively amplified probe.
pub fn count_rate_model(params: &OpaParams, probe_power_nw: f64, pump_phase: f64, spcm: &SpcmChannel) -> Result<f64> {
    spcm.validate()?;
    ensure(
        probe_power_nw >= 0.0 && probe_power_nw.is_finite(),
        "probe_power",
        probe_power_nw,
        "must be non-negative",
    )?;
    let x = normalized_pump(params)?;
    let x2 = x * x;
    let fluorescence = spcm.fluorescence_scale() * x2 / (1.0 - x2);
    let probe = PROBE_RATE_PER_NW * probe_power_nw * parametric_power_gain(x, pump_phase)?;
    Ok(spcm.background_rate + spcm.etalon_transmission * (fluorescence + probe))
}

/// Poisson counts per sample with mean `rate · dt`.
pub fn spcm_counts(rate_series: &TimeSeries, seed: u64) -> Result<Vec<u64>> {
    let dt = rate_series.dt();
    let mut r = rng(seed);
    rate_series
        .samples()
        .iter()
        .enumerate()
        .map(|(index, &rate)| poisson_draw(rate, dt, index, &mut r))
        .collect()
}

pub(crate) fn poisson_draw(rate: f64, dt: f64, index: usize, r: &mut rand_chacha::ChaCha8Rng) -> Result<u64> {
    if rate < 0.0 || !rate.is_finite() {
        return Err(Error::NegativeRate { index, rate });
    }
    let lambda = rate * dt;
    if lambda == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(lambda).map_err(|_| Error::NegativeRate { index, rate })?;
    Ok(d.sample(r) as u64)
}

/// Sums counts into bins of `bin_width` seconds and returns the count rate per bin in Hz.
/// A trailing partial bin is dropped.
pub fn rebin_counts(counts: &[u64], sample_rate: f64, bin_width: f64) -> Result<TimeSeries> {
    ensure(bin_width > 0.0, "bin_width", bin_width, "must be positive")?;
    let per_bin = (bin_width * sample_rate).round() as usize;
    if per_bin == 0 || counts.len() < per_bin {
        return Err(Error::SeriesTooShort {
            required: per_bin.max(1),
            actual: counts.len(),
        });
    }
    let width = per_bin as f64 / sample_rate;
    let rates = counts
        .chunks_exact(per_bin)
        .map(|c| c.iter().sum::<u64>() as f64 / width)
        .collect();
    TimeSeries::new(1.0 / width, rates)
}
