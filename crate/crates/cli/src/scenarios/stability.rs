//! Long hold of the squeezed quadrature, logged once per point interval.

use opatwin_core::analyzer::zero_span;
use opatwin_core::inference::stability_metrics;
use opatwin_core::TimeSeries;
use rayon::prelude::*;
use serde_json::json;

use super::{mean, measure, record_seed, relative_db, RunResult, Trace};
use crate::config::ScenarioConfig;
use crate::export::{num, Meta, RunOutput, Table};

const SCENARIO: u64 = 10;

/// Squeezing versus time at `stability.center`.
///
/// The run is synthesized in blocks. Each logged point is the video-filtered squeezed band
/// power averaged over one point interval, referred to the SQL and dark levels averaged
/// over the whole run.
pub fn stability(config: &ScenarioConfig) -> RunResult<RunOutput> {
    config.validate()?;
    let s = &config.stability;
    let source = config.source()?;
    let fs = s.sample_rate;
    let n = (s.block_duration * fs).round() as usize;
    let per_point = (s.point_interval * fs).round() as usize;
    let blocks = (s.duration / s.block_duration).floor() as usize;

    let per_block: Vec<(f64, f64, Vec<f64>)> = (0..blocks as u64)
        .into_par_iter()
        .map(|b| {
            let band = |trace: Trace| -> RunResult<Vec<f64>> {
                let x = measure(config, &source, trace, fs, n, record_seed(config, SCENARIO, trace as u64, b))?;
                Ok(zero_span(&x, s.center, s.rbw, s.vbw)?.into_samples())
            };
            let sq = band(Trace::Squeezed)?;
            Ok((mean(&band(Trace::Sql)?), mean(&band(Trace::Dark)?), sq.chunks_exact(per_point).map(mean).collect()))
        })
        .collect::<RunResult<_>>()?;
    let (mut sql_sum, mut dark_sum) = (0.0, 0.0);
    let mut squeezed_points = Vec::new();
    for (sql, dark, points) in per_block {
        sql_sum += sql;
        dark_sum += dark;
        squeezed_points.extend(points);
    }
    let sql = sql_sum / blocks as f64;
    let dark = dark_sum / blocks as f64;
    let db: Vec<f64> = squeezed_points.iter().map(|&p| relative_db(p, sql, dark)).collect();
    let metrics = stability_metrics(&TimeSeries::new(1.0 / s.point_interval, db.clone())?)?;

    let mut table = Table::new(&["time_s", "squeezing_db"])
        .note("center_hz", s.center)
        .note("rbw_hz", s.rbw)
        .note("vbw_hz", s.vbw);
    for (k, v) in db.iter().enumerate() {
        table.push(vec![k as f64 * s.point_interval, *v]);
    }
    let summary = json!({
        "duration_s": blocks as f64 * s.block_duration,
        "points": db.len(),
        "mean_squeezing_db": num(mean(&db)),
        "std_db": num(metrics.std_db),
        "peak_to_peak_db": num(metrics.peak_to_peak_db),
        "drift_db_per_hour": num(metrics.drift_db_per_hour),
    });
    Ok(RunOutput::new(Meta::new("stability", config), summary).with_table("trace", table))
}
