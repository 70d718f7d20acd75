use serde::{Deserialize, Serialize};

use crate::series::TimeSeries;

/// Fringe fitted during the initial phase scan:
/// `O(φ) = offset + amplitude · cos(m (φ − maximum_phase))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub offset: f64,
    pub amplitude: f64,
    pub amplitude_std_error: f64,
    /// Actuator phase of the fringe maximum.
    pub maximum_phase: f64,
    pub harmonic: f64,
}

impl FringeFit {
    /// Whether the fringe stands out of the scan noise.
    pub fn is_present(&self) -> bool {
        self.amplitude > 10.0 * self.amplitude_std_error
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockResult {
    /// Phase error relative to the target extremum, dither excluded, from engagement on.
    pub phase_error_series: Option<TimeSeries>,
    /// RMS phase error over the post-acquisition window.
    pub rms_error: f64,
    pub locked: bool,
    /// Seconds from engagement until the error settled, if it did.
    pub acquisition_time: Option<f64>,
    /// Time at which the loop was closed.
    pub engage_time: f64,
    /// Plant observable over the whole run (scan and lock), averaged to the record rate.
    pub observable: TimeSeries,
    /// Normalized demodulated error in radians, from engagement on.
    pub error_signal: Option<TimeSeries>,
    pub fringe: FringeFit,
    pub diagnostic: Option<String>,
    /// Full-rate plant signal captured at the end of the run, when requested.
    pub raw_capture: Option<TimeSeries>,
}

pub(crate) struct Settling {
    pub acquisition_index: usize,
    pub rms: f64,
}

/// First index from which `|e|` stays below `3 ×` the RMS of the last half of the record
/// for `hold` samples, and the RMS from there on.
pub(crate) fn settle(errors: &[f64], hold: usize) -> Option<Settling> {
    if errors.is_empty() {
        return None;
    }
    let tail = &errors[errors.len() / 2..];
    let tail_rms = (tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt();
    let threshold = 3.0 * tail_rms;
    let hold = hold.max(1);
    let mut run = 0usize;
    for (i, e) in errors.iter().enumerate() {
        if e.abs() < threshold {
            run += 1;
            if run >= hold {
                let start = i + 1 - hold;
                let window = &errors[start..];
                let rms = (window.iter().map(|e| e * e).sum::<f64>() / window.len() as f64).sqrt();
                return Some(Settling {
                    acquisition_index: start,
                    rms,
                });
            }
        } else {
            run = 0;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settle_skips_transient() {
        let mut e: Vec<f64> = (0..100).map(|i| 1.0 - i as f64 / 100.0).collect();
        e.extend((0..900).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }));
        let s = settle(&e, 5).unwrap();
        assert!(s.acquisition_index >= 96 && s.acquisition_index <= 100);
        assert!((s.rms - 0.01).abs() < 1e-3);
    }

    #[test]
    fn settle_on_empty_is_none() {
        assert!(settle(&[], 3).is_none());
    }
}
