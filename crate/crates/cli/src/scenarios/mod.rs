//! Figure scenarios. Each returns a [`RunOutput`](crate::export::RunOutput) holding the
//! data tables and a JSON summary.

mod fit;
mod lock_demo;
mod spectrum;
mod stability;
mod sweep;
mod zero_span;

pub use fit::{fit, parse_pairs, LabeledPair};
pub use lock_demo::{lock_demo, LockLoop};
pub use spectrum::spectrum;
pub use stability::stability;
pub use sweep::sweep_phase;
pub use zero_span::zero_span;

use std::f64::consts::FRAC_PI_2;

use opatwin_core::detection::{dark_measure, homodyne_measure};
use opatwin_core::noise::{derive_seed, phase_jitter_series};
use opatwin_core::physics::SqueezerModel;
use opatwin_core::TimeSeries;
use rayon::prelude::*;

use crate::config::{ConfigError, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] opatwin_core::Error),
    #[error("{0}")]
    Input(String),
}

pub type RunResult<T> = Result<T, RunError>;

/// The four records an analyzer measurement needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Trace {
    /// Pump blocked, vacuum at the signal port.
    Sql,
    /// LO locked to the squeezed quadrature.
    Squeezed,
    /// LO locked to the anti-squeezed quadrature.
    AntiSqueezed,
    /// LO and signal blocked.
    Dark,
}

impl Trace {
    pub(crate) const ALL: [Trace; 4] = [Trace::Sql, Trace::Squeezed, Trace::AntiSqueezed, Trace::Dark];
}

/// Seed of record `index` in stream `stream` of a named scenario.
pub(crate) fn record_seed(config: &ScenarioConfig, scenario: u64, stream: u64, index: u64) -> u64 {
    let base = derive_seed(derive_seed(config.seed, config.noise.seed), scenario);
    derive_seed(derive_seed(base, stream), index)
}

/// Squeezing-angle trajectory of a locked quadrature: `offset` plus the configured jitter.
pub(crate) fn locked_phase(config: &ScenarioConfig, offset: f64, sample_rate: f64, count: usize, seed: u64) -> RunResult<TimeSeries> {
    let j = &config.jitter;
    let series = if j.rms > 0.0 {
        phase_jitter_series(sample_rate, count, j.rms, j.corner_frequency, seed)?
    } else {
        TimeSeries::constant(sample_rate, count, 0.0)?
    };
    Ok(series.map(|v| v + offset)?)
}

/// One simulated photocurrent record of the given kind.
///
/// Spurious tones come from the lock electronics, so only the locked traces carry them.
pub(crate) fn measure(
    config: &ScenarioConfig,
    source: &SqueezerModel,
    trace: Trace,
    sample_rate: f64,
    count: usize,
    seed: u64,
) -> RunResult<TimeSeries> {
    let phase_seed = derive_seed(seed, 1);
    let noise_seed = derive_seed(seed, 2);
    let series = match trace {
        Trace::Sql => homodyne_measure(
            &config.noise.without_tones(),
            &source.pump_off(),
            &config.detector,
            &TimeSeries::constant(sample_rate, count, 0.0)?,
            sample_rate,
            noise_seed,
        )?,
        Trace::Squeezed | Trace::AntiSqueezed => {
            let offset = if trace == Trace::Squeezed { 0.0 } else { FRAC_PI_2 };
            let phase = locked_phase(config, offset, sample_rate, count, phase_seed)?;
            homodyne_measure(&config.noise, source, &config.detector, &phase, sample_rate, noise_seed)?
        }
        Trace::Dark => dark_measure(&config.noise, &config.detector, sample_rate, count, noise_seed)?,
    };
    Ok(series)
}

/// Runs `per_record` for `count` records in parallel and returns the point-by-point mean
/// of each of the `K` outputs. Records are combined in index order, so the result does not
/// depend on scheduling.
pub(crate) fn average_records<const K: usize, F>(count: usize, per_record: F) -> RunResult<[Vec<f64>; K]>
where
    F: Fn(u64) -> RunResult<[Vec<f64>; K]> + Sync,
{
    const CHUNK: usize = 32;
    let mut sums: Option<[Vec<f64>; K]> = None;
    for start in (0..count).step_by(CHUNK) {
        let end = (start + CHUNK).min(count);
        let records: Vec<[Vec<f64>; K]> = (start..end)
            .into_par_iter()
            .map(|i| per_record(i as u64))
            .collect::<RunResult<_>>()?;
        for rec in records {
            match &mut sums {
                None => sums = Some(rec),
                Some(acc) => {
                    for (a, r) in acc.iter_mut().zip(rec) {
                        if a.len() != r.len() {
                            return Err(opatwin_core::Error::ShapeMismatch(format!(
                                "record of {} points, expected {}",
                                r.len(),
                                a.len()
                            ))
                            .into());
                        }
                        a.iter_mut().zip(r).for_each(|(x, y)| *x += y);
                    }
                }
            }
        }
    }
    let mut out = sums.ok_or(opatwin_core::Error::EmptyInput)?;
    for v in &mut out {
        v.iter_mut().for_each(|x| *x /= count as f64);
    }
    Ok(out)
}

/// `10 log10((s − d) / (r − d))` of scalar levels.
pub(crate) fn relative_db(signal: f64, sql: f64, dark: f64) -> f64 {
    10.0 * ((signal - dark) / (sql - dark)).log10()
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation of the finite entries.
pub(crate) fn std_dev(v: &[f64]) -> f64 {
    let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if finite.len() < 2 {
        return 0.0;
    }
    let m = mean(&finite);
    (finite.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (finite.len() - 1) as f64).sqrt()
}
