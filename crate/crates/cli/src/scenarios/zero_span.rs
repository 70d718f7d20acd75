//! Zero-span band power versus time at low analysis frequencies.

use opatwin_core::analyzer;
use opatwin_core::analyzer::normalize_and_subtract;
use opatwin_core::noise::derive_seed;
use serde_json::{json, Value};

use super::{average_records, mean, measure, record_seed, relative_db, std_dev, RunResult, Trace};
use crate::config::{ScenarioConfig, ZeroSpanPoint};
use crate::export::{num, Meta, RunOutput, Table};

const SCENARIO: u64 = 5;

/// Measurement point for `center`: the configured point with that center, or the nearest
/// configured point moved to `center` with the sample rate raised if needed.
pub fn point_for(config: &ScenarioConfig, center: f64) -> ZeroSpanPoint {
    let nearest = config
        .zero_span
        .points
        .iter()
        .min_by(|a, b| (a.center - center).abs().total_cmp(&(b.center - center).abs()))
        .expect("validated configuration has points");
    let mut p = nearest.clone();
    if p.center != center {
        p.center = center;
        p.sample_rate = p.sample_rate.max(4.0 * (center + p.rbw));
    }
    p
}

fn run_point(config: &ScenarioConfig, p: &ZeroSpanPoint, index: u64) -> RunResult<(Table, Value)> {
    let source = config.source()?;
    let n = (config.zero_span.record_duration * p.sample_rate).round() as usize;
    let averages = config.zero_span.averages;
    let [sql, sq, anti, dark] = average_records::<4, _>(averages, |i| {
        let mut out: [Vec<f64>; 4] = Default::default();
        for (slot, trace) in out.iter_mut().zip(Trace::ALL) {
            let seed = record_seed(config, SCENARIO, derive_seed(index, trace as u64), i);
            let x = measure(config, &source, trace, p.sample_rate, n, seed)?;
            *slot = analyzer::zero_span(&x, p.center, p.rbw, p.vbw)?.into_samples();
        }
        Ok(out)
    })?;
    let sq_db = normalize_and_subtract(&sq, &sql, Some(&dark))?;
    let anti_db = normalize_and_subtract(&anti, &sql, Some(&dark))?;
    let sql_db = normalize_and_subtract(&sql, &sql, Some(&dark))?;

    let mut table = Table::new(&["time_s", "sql_db", "squeezed_db", "anti_squeezed_db"])
        .note("center_hz", p.center)
        .note("rbw_hz", p.rbw)
        .note("vbw_hz", p.vbw)
        .note("averages", averages);
    let step = ((p.sample_rate / (10.0 * p.vbw)).floor() as usize).max(1);
    for k in (0..n).step_by(step) {
        table.push(vec![k as f64 / p.sample_rate, sql_db.db[k], sq_db.db[k], anti_db.db[k]]);
    }

    let (m_sql, m_dark) = (mean(&sql), mean(&dark));
    let squeezing = relative_db(mean(&sq), m_sql, m_dark);
    let summary = json!({
        "center_hz": p.center,
        "rbw_hz": p.rbw,
        "vbw_hz": p.vbw,
        "squeezing_db": num(squeezing),
        "squeezing_trace_std_db": num(std_dev(&sq_db.db)),
        "anti_squeezing_db": num(relative_db(mean(&anti), m_sql, m_dark)),
        "flagged_points": sq_db.flagged.len() + anti_db.flagged.len(),
    });
    Ok((table, summary))
}

/// RMS-averaged zero-span traces at every configured point, or only at `center`.
///
/// Summary levels are in dB relative to the SQL, so squeezing is negative.
pub fn zero_span(config: &ScenarioConfig, center: Option<f64>) -> RunResult<RunOutput> {
    config.validate()?;
    let points: Vec<ZeroSpanPoint> = match center {
        Some(c) => vec![point_for(config, c)],
        None => config.zero_span.points.clone(),
    };
    let mut results = Vec::new();
    let mut tables = Vec::new();
    for p in &points {
        if p.center <= p.rbw / 2.0 {
            return Err(super::RunError::Input(format!(
                "center {} Hz must exceed half the RBW ({} Hz)",
                p.center,
                p.rbw / 2.0
            )));
        }
        // Seeds depend on the center, not on the position in the list.
        let (table, summary) = run_point(config, p, p.center.to_bits())?;
        tables.push((format!("{}hz", p.center), table));
        results.push(summary);
    }
    let summary = json!({
        "averages": config.zero_span.averages,
        "record_duration_s": config.zero_span.record_duration,
        "points": results,
    });
    let mut out = RunOutput::new(Meta::new("zero-span", config), summary);
    for (name, t) in tables {
        out = out.with_table(&name, t);
    }
    Ok(out)
}
