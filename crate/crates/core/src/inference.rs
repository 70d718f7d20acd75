//! Parameter recovery from squeezing measurements.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::{from_db, PhaseJitter, QuadratureVariancePair};
use crate::series::TimeSeries;

/// Squeezing and anti-squeezing levels in dB relative to the SQL at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPair {
    pub squeezing_db: f64,
    pub anti_squeezing_db: f64,
    #[serde(default)]
    pub frequency: f64,
}

impl MeasurementPair {
    pub fn new(squeezing_db: f64, anti_squeezing_db: f64, frequency: f64) -> Self {
        Self {
            squeezing_db,
            anti_squeezing_db,
            frequency,
        }
    }

    pub fn from_variances(pair: &QuadratureVariancePair, frequency: f64) -> Self {
        Self::new(pair.squeezing_db(), pair.anti_squeezing_db(), frequency)
    }

    fn variances(&self) -> Result<QuadratureVariancePair> {
        QuadratureVariancePair::from_db(self.squeezing_db, self.anti_squeezing_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterFit {
    /// Joint least-squares estimate over both quadratures in dB.
    pub jitter: PhaseJitter,
    /// Closed-form estimate from the squeezed quadrature alone, if it lies in range.
    pub from_squeezing: Option<f64>,
    /// Closed-form estimate from the anti-squeezed quadrature alone, if it lies in range.
    pub from_anti_squeezing: Option<f64>,
    /// Root-sum-square dB residual of the joint fit.
    pub residual_db: f64,
}

const BISECTION_TOL: f64 = 1e-12;
/// Slack for observed squeezing that matches the ideal up to rounding.
const CONSISTENCY_SLACK_DB: f64 = 1e-9;

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn angle_from_mix(u: f64) -> Option<f64> {
    (0.0..=0.5).contains(&u).then(|| u.sqrt().asin())
}

/// RMS phase jitter that turns `ideal` into `observed` under quadrature mixing.
///
/// Solves for `u = sin² θ ∈ [0, ½]` minimizing the squared dB residual of both quadratures.
pub fn fit_phase_jitter(observed: &MeasurementPair, ideal: &MeasurementPair) -> Result<JitterFit> {
    if observed.squeezing_db < ideal.squeezing_db - CONSISTENCY_SLACK_DB {
        return Err(Error::InconsistentData(format!(
            "observed squeezing {} dB is deeper than the ideal {} dB",
            observed.squeezing_db, ideal.squeezing_db
        )));
    }
    let id = ideal.variances()?;
    let obs = observed.variances()?;
    let span = id.r_plus - id.r_minus;
    if span <= 0.0 {
        return Err(Error::InconsistentData(
            "ideal anti-squeezing must exceed ideal squeezing".into(),
        ));
    }
    let db = |v: f64| 10.0 * v.log10();
    let k = 10.0 / std::f64::consts::LN_10;
    let residuals = |u: f64| {
        let minus = id.r_minus + u * span;
        let plus = id.r_plus - u * span;
        (minus, plus, db(minus) - observed.squeezing_db, db(plus) - observed.anti_squeezing_db)
    };
    let slope = |u: f64| {
        let (minus, plus, e_minus, e_plus) = residuals(u);
        2.0 * k * span * (e_minus / minus - e_plus / plus)
    };
    // A slope this close to zero at u = 0 is rounding noise from an exact match.
    let u = if slope(0.0) >= -1e-9 {
        0.0
    } else if slope(0.5) <= 0.0 {
        0.5
    } else {
        bisect(0.0, 0.5, slope)
    };
    let (_, _, e_minus, e_plus) = residuals(u);
    Ok(JitterFit {
        jitter: PhaseJitter::new(u.sqrt().asin())?,
        from_squeezing: angle_from_mix((obs.r_minus - id.r_minus) / span),
        from_anti_squeezing: angle_from_mix((id.r_plus - obs.r_plus) / span),
        residual_db: e_minus.hypot(e_plus),
    })
}

/// Normalized pump and total detection efficiency at zero analysis frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub normalized_pump: f64,
    pub total_efficiency: f64,
}

/// Inverts the zero-frequency squeezing relations for `(x, K)`.
///
/// The ratio `(R+ − 1)/(1 − R−) = ((1+x)/(1−x))²` depends on `x` alone and is solved by
/// bisection; `K` then follows from the squeezed quadrature.
pub fn fit_opa_operating_point(pair: &MeasurementPair) -> Result<OperatingPoint> {
    if pair.squeezing_db == 0.0 && pair.anti_squeezing_db == 0.0 {
        return Err(Error::Indeterminate(
            "a pair at the SQL implies zero pump, which leaves the efficiency unconstrained",
        ));
    }
    let r_minus = from_db(pair.squeezing_db);
    let r_plus = from_db(pair.anti_squeezing_db);
    if r_minus >= 1.0 || r_plus <= 1.0 {
        return Err(Error::Infeasible(format!(
            "pair ({}, {}) dB is not a squeezed state",
            pair.squeezing_db, pair.anti_squeezing_db
        )));
    }
    let q = (r_plus - 1.0) / (1.0 - r_minus);
    if q <= 1.0 {
        return Err(Error::Infeasible(format!(
            "anti-squeezing excess {} does not exceed the squeezing depth {}",
            r_plus - 1.0,
            1.0 - r_minus
        )));
    }
    let ratio = |x: f64| ((1.0 + x) / (1.0 - x)).powi(2) - q;
    let x = bisect(0.0, 1.0 - 1e-15, ratio);
    let k = (1.0 - r_minus) * (1.0 + x) * (1.0 + x) / (4.0 * x);
    if k > 1.0 + 1e-9 {
        return Err(Error::Infeasible(format!(
            "pair requires total efficiency {k:.6} above unity"
        )));
    }
    Ok(OperatingPoint {
        normalized_pump: x,
        total_efficiency: k.min(1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityMetrics {
    pub std_db: f64,
    pub peak_to_peak_db: f64,
    pub drift_db_per_hour: f64,
}

/// Spread and linear drift of a squeezing-versus-time trace in dB.
pub fn stability_metrics(trace: &TimeSeries) -> Result<StabilityMetrics> {
    const MIN_POINTS: usize = 10;
    let y = trace.samples();
    if y.len() < MIN_POINTS {
        return Err(Error::SeriesTooShort {
            required: MIN_POINTS,
            actual: y.len(),
        });
    }
    let n = y.len() as f64;
    let mean = trace.mean();
    let std_db = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let (min, max) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let t_mean = (n - 1.0) / 2.0 * trace.dt();
    let (sxy, sxx) = y.iter().enumerate().fold((0.0, 0.0), |(sxy, sxx), (i, &v)| {
        let dt = trace.time(i) - t_mean;
        (sxy + dt * (v - mean), sxx + dt * dt)
    });
    Ok(StabilityMetrics {
        std_db,
        peak_to_peak_db: max - min,
        drift_db_per_hour: sxy / sxx * 3600.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::apply_phase_jitter;

    fn ideal() -> MeasurementPair {
        MeasurementPair::new(-5.70, 13.68, 5e3)
    }

    #[test]
    fn observed_pair_gives_eighteen_mrad() {
        let fit = fit_phase_jitter(&MeasurementPair::new(-5.57, 13.80, 5e3), &ideal()).unwrap();
        let mrad = fit.jitter.rms * 1e3;
        assert!((mrad - 18.0).abs() <= 1.5, "joint {mrad} mrad");
        let sq = fit.from_squeezing.unwrap() * 1e3;
        assert!((sq - 18.0).abs() <= 1.5, "squeezing-only {sq} mrad");
        assert!(fit.from_anti_squeezing.is_none());
    }

    #[test]
    fn identical_pair_gives_zero() {
        let fit = fit_phase_jitter(&ideal(), &ideal()).unwrap();
        assert_eq!(fit.jitter.rms, 0.0);
    }

    #[test]
    fn round_trip_recovers_jitter() {
        let pair = ideal().variances().unwrap();
        for theta in [0.005, 0.018, 0.050] {
            let obs = apply_phase_jitter(pair, PhaseJitter::new(theta).unwrap());
            let fit = fit_phase_jitter(&MeasurementPair::from_variances(&obs, 5e3), &ideal()).unwrap();
            assert!((fit.jitter.rms - theta).abs() < 1e-4, "{theta} -> {}", fit.jitter.rms);
        }
    }

    #[test]
    fn better_than_ideal_is_inconsistent() {
        let err = fit_phase_jitter(&MeasurementPair::new(-6.0, 13.68, 5e3), &ideal()).unwrap_err();
        assert!(matches!(err, Error::InconsistentData(_)));
    }

    #[test]
    fn operating_point_round_trip() {
        let (x, k) = (0.7785_f64, 0.770_f64);
        let r_minus = 1.0 - k * 4.0 * x / ((1.0 + x) * (1.0 + x));
        let r_plus = 1.0 + k * 4.0 * x / ((1.0 - x) * (1.0 - x));
        let pair = MeasurementPair::new(10.0 * r_minus.log10(), 10.0 * r_plus.log10(), 0.0);
        let op = fit_opa_operating_point(&pair).unwrap();
        assert!((op.normalized_pump / x - 1.0).abs() < 1e-6);
        assert!((op.total_efficiency / k - 1.0).abs() < 1e-6);
    }

    #[test]
    fn operating_point_edge_cases() {
        assert!(matches!(
            fit_opa_operating_point(&MeasurementPair::new(0.0, 0.0, 0.0)),
            Err(Error::Indeterminate(_))
        ));
        assert!(matches!(
            fit_opa_operating_point(&MeasurementPair::new(-6.0, 1.0, 0.0)),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            fit_opa_operating_point(&MeasurementPair::new(-10.0, 3.0, 0.0)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn calibration_pair_resubstitutes() {
        let op = fit_opa_operating_point(&ideal()).unwrap();
        let x = op.normalized_pump;
        let k = op.total_efficiency;
        let r_minus = 1.0 - k * 4.0 * x / ((1.0 + x) * (1.0 + x));
        let r_plus = 1.0 + k * 4.0 * x / ((1.0 - x) * (1.0 - x));
        assert!((10.0 * r_minus.log10() + 5.70).abs() < 0.01);
        assert!((10.0 * r_plus.log10() - 13.68).abs() < 0.01);
        assert!((x - 0.69363).abs() < 1e-4, "x = {x}");
        assert!((k - 0.75557).abs() < 1e-4, "K = {k}");
    }

    #[test]
    fn stability_oracles() {
        let flat = TimeSeries::constant(1.0, 100, -5.6).unwrap();
        let m = stability_metrics(&flat).unwrap();
        assert!(m.std_db < 1e-12);
        assert_eq!(m.peak_to_peak_db, 0.0);
        assert!(m.drift_db_per_hour.abs() < 1e-12);

        let ramp = TimeSeries::new(1.0, (0..3600).map(|i| 0.1 * i as f64 / 3600.0).collect()).unwrap();
        let m = stability_metrics(&ramp).unwrap();
        assert!((m.drift_db_per_hour - 0.1).abs() < 0.01);

        let short = TimeSeries::constant(1.0, 5, 0.0).unwrap();
        assert!(matches!(stability_metrics(&short), Err(Error::SeriesTooShort { .. })));
    }
}
