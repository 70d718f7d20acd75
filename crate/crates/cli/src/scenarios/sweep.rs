//! Noise power at a fixed analysis frequency while the LO phase is locked or scanned.

use std::f64::consts::PI;

use opatwin_core::analyzer::{normalize_and_subtract, zero_span};
use opatwin_core::detection::homodyne_measure;
use opatwin_core::noise::derive_seed;
use opatwin_core::TimeSeries;
use serde_json::json;

use super::{average_records, locked_phase, mean, measure, record_seed, relative_db, std_dev, RunResult, Trace};
use crate::config::ScenarioConfig;
use crate::export::{num, Meta, RunOutput, Table};

const SCENARIO: u64 = 2;

/// SQL, locked squeezed, scanned and locked anti-squeezed traces, normalized to the SQL
/// with dark noise subtracted. Locked traces and the SQL are RMS averaged over
/// `analyzer.averages` records; the scanned trace is a single record.
pub fn sweep_phase(config: &ScenarioConfig) -> RunResult<RunOutput> {
    config.validate()?;
    let source = config.source()?;
    let a = &config.analyzer;
    let fs = config.sweep.sample_rate;
    let n = (config.sweep.record_duration * fs).round() as usize;
    let detect = |x: &TimeSeries| zero_span(x, a.start_or_center, a.rbw, a.vbw);

    let [sql, sq, anti, dark] = average_records::<4, _>(a.averages, |i| {
        let mut out: [Vec<f64>; 4] = Default::default();
        for (slot, trace) in out.iter_mut().zip(Trace::ALL) {
            let x = measure(config, &source, trace, fs, n, record_seed(config, SCENARIO, trace as u64, i))?;
            *slot = detect(&x)?.into_samples();
        }
        Ok(out)
    })?;

    // Two full quadrature periods over the record.
    let scan_seed = record_seed(config, SCENARIO, 10, 0);
    let jitter = locked_phase(config, 0.0, fs, n, derive_seed(scan_seed, 1))?;
    let ramp: Vec<f64> = jitter
        .samples()
        .iter()
        .enumerate()
        .map(|(k, j)| j + 2.0 * PI * k as f64 / n as f64)
        .collect();
    let scanned_x = homodyne_measure(
        &config.noise,
        &source,
        &config.detector,
        &TimeSeries::new(fs, ramp)?,
        fs,
        derive_seed(scan_seed, 2),
    )?;
    let scanned = detect(&scanned_x)?.into_samples();

    let norm = |t: &[f64]| normalize_and_subtract(t, &sql, Some(&dark));
    let sql_db = norm(&sql)?;
    let sq_db = norm(&sq)?;
    let anti_db = norm(&anti)?;
    let scan_db = norm(&scanned)?;

    let mut table = Table::new(&["time_s", "sql_db", "squeezed_db", "scanned_db", "anti_squeezed_db"])
        .note("center_hz", a.start_or_center)
        .note("rbw_hz", a.rbw)
        .note("vbw_hz", a.vbw)
        .note("averages", a.averages);
    // Ten display points per 1/vbw.
    let step = ((fs / (10.0 * a.vbw)).floor() as usize).max(1);
    for k in (0..n).step_by(step) {
        table.push(vec![k as f64 / fs, sql_db.db[k], sq_db.db[k], scan_db.db[k], anti_db.db[k]]);
    }

    let (m_sql, m_dark) = (mean(&sql), mean(&dark));
    let squeezing = relative_db(mean(&sq), m_sql, m_dark);
    let anti_squeezing = relative_db(mean(&anti), m_sql, m_dark);
    let finite = |v: &[f64]| v.iter().copied().filter(|x| x.is_finite()).collect::<Vec<_>>();
    let scan_finite = finite(&scan_db.db);
    let summary = json!({
        "analysis_frequency_hz": a.start_or_center,
        "squeezing_db": num(squeezing),
        "anti_squeezing_db": num(anti_squeezing),
        "squeezing_trace_std_db": num(std_dev(&sq_db.db)),
        "anti_squeezing_trace_std_db": num(std_dev(&anti_db.db)),
        "scanned_min_db": num(scan_finite.iter().copied().fold(f64::INFINITY, f64::min)),
        "scanned_max_db": num(scan_finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        "flagged_points": sq_db.flagged.len() + anti_db.flagged.len() + scan_db.flagged.len(),
        "averages": a.averages,
        "model": {
            "squeezing_db": num(source.variances(a.start_or_center).squeezing_db()),
            "anti_squeezing_db": num(source.variances(a.start_or_center).anti_squeezing_db()),
        },
    });
    Ok(RunOutput::new(Meta::new("sweep-phase", config), summary).with_table("traces", table))
}
