//! Scan, fit, engage and hold: the procedure shared by both dither locks.

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lockin::{LockIn, LockInConfig};
use super::pid::{pid_step, PidConfig, PidState};
use super::result::{settle, FringeFit, LockResult};
use crate::error::{ensure, Error, Result};
use crate::noise::rng;
use crate::series::TimeSeries;

/// Everything needed to run one dither lock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    pub lockin: LockInConfig,
    pub pid: PidConfig,
    /// Length of the open-loop phase scan before engagement, in seconds.
    pub scan_duration: f64,
    /// Rate of the recorded traces in Hz.
    pub record_rate: f64,
    /// Largest post-acquisition RMS phase error still reported as locked, in radians.
    pub max_rms_error: f64,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        self.lockin.validate()?;
        self.pid.validate()?;
        ensure(
            self.scan_duration > 0.0 && self.scan_duration.is_finite(),
            "scan_duration",
            self.scan_duration,
            "must be positive",
        )?;
        ensure(
            self.record_rate > 0.0 && self.record_rate.is_finite(),
            "record_rate",
            self.record_rate,
            "must be positive",
        )?;
        ensure(
            self.max_rms_error > 0.0,
            "max_rms_error",
            self.max_rms_error,
            "must be positive",
        )
    }
}

/// A plant whose observable depends on a controlled phase with period `2π / harmonic`.
pub(crate) trait DitherPlant {
    fn sample_rate(&self) -> f64;
    fn harmonic(&self) -> f64;
    /// True phase at which the noiseless observable is largest.
    fn maximum_phase(&self) -> f64;
    /// One observable sample at `phase` (dither included); `carrier` is the dither
    /// reference phase at this sample.
    fn sample(&mut self, phase: f64, carrier: f64, rng: &mut ChaCha8Rng) -> Result<f64>;
    /// Response of the observable chain to a modulation at `frequency`.
    fn modulation_response(&self, _frequency: f64) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }
}

fn wrap(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

/// Averages consecutive samples into record bins.
struct Recorder {
    per_bin: usize,
    sum: f64,
    count: usize,
    out: Vec<f64>,
}

impl Recorder {
    fn new(per_bin: usize) -> Self {
        Self {
            per_bin,
            sum: 0.0,
            count: 0,
            out: Vec::new(),
        }
    }

    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
        if self.count == self.per_bin {
            self.out.push(self.sum / self.count as f64);
            self.sum = 0.0;
            self.count = 0;
        }
    }
}

/// Solves the 3×3 symmetric system `m · x = v`, returning `x` and `m⁻¹`.
fn solve3(m: [[f64; 3]; 3], v: [f64; 3]) -> Option<([f64; 3], [[f64; 3]; 3])> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            *cell = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
        }
    }
    let x = [0, 1, 2].map(|i| (0..3).map(|j| inv[i][j] * v[j]).sum());
    Some((x, inv))
}

/// Least-squares fit of `a0 + a1 cos(mφ) + b1 sin(mφ)`.
pub(crate) fn fit_fringe(phases: &[f64], values: &[f64], harmonic: f64) -> FringeFit {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (&p, &y) in phases.iter().zip(values) {
        let row = [1.0, (harmonic * p).cos(), (harmonic * p).sin()];
        for i in 0..3 {
            atb[i] += row[i] * y;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let Some((coef, inv)) = solve3(ata, atb) else {
        return FringeFit {
            offset: 0.0,
            amplitude: 0.0,
            amplitude_std_error: f64::INFINITY,
            maximum_phase: 0.0,
            harmonic,
        };
    };
    let [a0, a1, b1] = coef;
    let rss: f64 = phases
        .iter()
        .zip(values)
        .map(|(&p, &y)| {
            let r = y - (a0 + a1 * (harmonic * p).cos() + b1 * (harmonic * p).sin());
            r * r
        })
        .sum();
    let dof = (phases.len() as f64 - 3.0).max(1.0);
    let s2 = rss / dof;
    let amplitude = a1.hypot(b1);
    let var_a = if amplitude > 0.0 {
        s2 * (a1 * a1 * inv[1][1] + b1 * b1 * inv[2][2] + 2.0 * a1 * b1 * inv[1][2]) / (amplitude * amplitude)
    } else {
        s2 * 0.5 * (inv[1][1] + inv[2][2])
    };
    FringeFit {
        offset: a0,
        amplitude,
        amplitude_std_error: var_a.max(0.0).sqrt(),
        maximum_phase: b1.atan2(a1) / harmonic,
        harmonic,
    }
}

/// Runs the scan, fits the fringe and, when a fringe is present, closes the loop at the
/// extremum chosen by `sign` (+1 minimum, −1 maximum) for `duration` seconds.
pub(crate) fn run_lock<P: DitherPlant>(
    plant: &mut P,
    config: &LoopConfig,
    sign: f64,
    disturbance: &TimeSeries,
    duration: f64,
    seed: u64,
) -> Result<LockResult> {
    config.validate()?;
    ensure(duration > 0.0 && duration.is_finite(), "duration", duration, "must be positive")?;
    let fs = plant.sample_rate();
    let dt = 1.0 / fs;
    let m = plant.harmonic();
    let period = TAU / m;
    let response = plant.modulation_response(config.lockin.mod_frequency);
    let lockin_cfg = LockInConfig {
        demod_phase: config.lockin.demod_phase + response.arg(),
        ..config.lockin.clone()
    };
    let mut lockin = LockIn::new(&lockin_cfg, fs)?;
    let delta = config.lockin.mod_amplitude;
    let per_bin = ((fs / config.record_rate).round() as usize).max(1);
    let record_rate = fs / per_bin as f64;
    let mut r = rng(seed);

    let n_scan = (config.scan_duration * fs).round() as usize;
    let mut observable = Recorder::new(per_bin);
    let mut scan_phase = Recorder::new(per_bin);
    for n in 0..n_scan {
        let t = n as f64 * dt;
        let actuator = 2.0 * period * n as f64 / n_scan as f64;
        let carrier = lockin.carrier_phase();
        let phase = actuator + disturbance.value_at(t) + delta * carrier.sin();
        let o = plant.sample(phase, carrier, &mut r)?;
        lockin.step(o);
        observable.push(o);
        scan_phase.push(actuator);
    }
    let n_fit = observable.out.len().min(scan_phase.out.len());
    if n_fit < 4 {
        return Err(Error::SeriesTooShort {
            required: 4 * per_bin,
            actual: n_scan,
        });
    }
    if observable.out.iter().all(|&v| v == 0.0) {
        return Err(Error::NoSignal("observable is identically zero during the scan"));
    }
    let fringe = fit_fringe(&scan_phase.out[..n_fit], &observable.out[..n_fit], m);
    let engage_time = n_scan as f64 * dt;

    if !fringe.is_present() {
        let diagnostic = format!(
            "no fringe: scan amplitude {:.3e} is below 10x its standard error {:.3e}",
            fringe.amplitude, fringe.amplitude_std_error
        );
        return Ok(LockResult {
            phase_error_series: None,
            rms_error: f64::NAN,
            locked: false,
            acquisition_time: None,
            engage_time,
            observable: TimeSeries::new(record_rate, observable.out)?,
            error_signal: None,
            fringe,
            diagnostic: Some(diagnostic),
            raw_capture: None,
        });
    }

    let to_minimum = if sign > 0.0 { period / 2.0 } else { 0.0 };
    let engage_phase = fringe.maximum_phase + to_minimum;
    let true_target = plant.maximum_phase() + to_minimum;
    let gain = delta * m * m * fringe.amplitude * response.norm();
    let pid_cfg = config.pid.with_sign(sign);
    let mut pid = PidState::default();
    let mut u = 0.0;
    let n_lock = (duration * fs).round() as usize;
    let mut phase_error = Recorder::new(per_bin);
    let mut error_signal = Recorder::new(per_bin);
    for n in 0..n_lock {
        let t = (n_scan + n) as f64 * dt;
        let phase = engage_phase + u + disturbance.value_at(t);
        let carrier = lockin.carrier_phase();
        let o = plant.sample(phase + delta * carrier.sin(), carrier, &mut r)?;
        let e_raw = lockin.step(o) / gain;
        u = pid_step(&mut pid, &pid_cfg, -e_raw, dt);
        observable.push(o);
        error_signal.push(e_raw);
        phase_error.push(wrap(phase - true_target, period));
    }

    let hold = (10.0 * config.lockin.time_constant() * record_rate).ceil() as usize;
    let settling = settle(&phase_error.out, hold);
    let (rms_error, acquisition_time) = match &settling {
        Some(s) => (s.rms, Some(s.acquisition_index as f64 / record_rate)),
        None => {
            let e = &phase_error.out;
            let rms = if e.is_empty() {
                f64::NAN
            } else {
                (e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64).sqrt()
            };
            (rms, None)
        }
    };
    let locked = settling.is_some() && rms_error < config.max_rms_error;
    let diagnostic = if locked {
        None
    } else if settling.is_none() {
        Some("phase error never settled".to_string())
    } else {
        Some(format!(
            "residual {:.4} rad exceeds the lock criterion {:.4} rad",
            rms_error, config.max_rms_error
        ))
    };
    let series = |v: Vec<f64>| -> Result<Option<TimeSeries>> {
        if v.is_empty() {
            Ok(None)
        } else {
            TimeSeries::new(record_rate, v).map(Some)
        }
    };
    Ok(LockResult {
        phase_error_series: series(phase_error.out)?,
        rms_error,
        locked,
        acquisition_time,
        engage_time,
        observable: TimeSeries::new(record_rate, observable.out)?,
        error_signal: series(error_signal.out)?,
        fringe,
        diagnostic,
        raw_capture: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fringe_fit_recovers_parameters() {
        let phases: Vec<f64> = (0..400).map(|i| i as f64 * 0.01).collect();
        let values: Vec<f64> = phases.iter().map(|p| 3.0 + 2.0 * (2.0 * (p - 0.4)).cos()).collect();
        let f = fit_fringe(&phases, &values, 2.0);
        assert!((f.offset - 3.0).abs() < 1e-9);
        assert!((f.amplitude - 2.0).abs() < 1e-9);
        assert!((f.maximum_phase - 0.4).abs() < 1e-9);
        assert!(f.is_present());
    }

    #[test]
    fn flat_data_has_no_fringe() {
        use crate::noise::white_noise;
        let phases: Vec<f64> = (0..400).map(|i| i as f64 * 0.03).collect();
        let noise = white_noise(1.0, 400, 1.0, 4).unwrap();
        let f = fit_fringe(&phases, noise.samples(), 1.0);
        assert!(!f.is_present());
    }

    #[test]
    fn wrap_is_centered() {
        assert!((wrap(3.0, PI) - (3.0 - PI)).abs() < 1e-12);
        assert!((wrap(-0.1, PI) + 0.1).abs() < 1e-12);
    }
}
