//! Broadband noise spectrum assembled from consecutive FFT windows.

use opatwin_core::analyzer::{fft_spectrum, log_resample, normalize_and_subtract, stitch, NormalizedTrace, PowerSpectrum, SpectrumConfig};
use serde_json::json;

use super::{average_records, measure, record_seed, relative_db, RunResult, Trace};
use crate::config::ScenarioConfig;
use crate::export::{num, Meta, RunOutput, Table};

const SCENARIO: u64 = 4;

/// SQL, squeezed and anti-squeezed spectra from `spectrum.windows`, dark subtracted and
/// normalized to the SQL. Each average is an independent record one FFT segment long.
pub fn spectrum(config: &ScenarioConfig) -> RunResult<RunOutput> {
    config.validate()?;
    let source = config.source()?;
    let mut per_trace: [Vec<PowerSpectrum>; 4] = Default::default();
    for (w_index, w) in config.spectrum.windows.iter().enumerate() {
        let cfg = SpectrumConfig::fft(w.start, w.stop, w.rbw, w.vbw, 1);
        let n = cfg.segment_length(w.sample_rate);
        let averaged = average_records::<4, _>(w.averages, |i| {
            let mut out: [Vec<f64>; 4] = Default::default();
            for (slot, trace) in out.iter_mut().zip(Trace::ALL) {
                let seed = record_seed(config, SCENARIO, 4 * w_index as u64 + trace as u64, i);
                let x = measure(config, &source, trace, w.sample_rate, n, seed)?;
                *slot = fft_spectrum(&x, &cfg)?.psd;
            }
            Ok(out)
        })?;
        // Frequency axis and bandwidths of this window, taken from a zero record.
        let axis = fft_spectrum(&opatwin_core::TimeSeries::constant(w.sample_rate, n, 0.0)?, &cfg)?;
        for (store, psd) in per_trace.iter_mut().zip(averaged) {
            store.push(PowerSpectrum {
                psd,
                n_averages: w.averages,
                ..axis.clone()
            });
        }
    }
    let [sql, sq, anti, dark] = per_trace.map(|windows| stitch(&windows));
    let (sql, sq, anti, dark) = (sql?, sq?, anti?, dark?);
    // With few averages the SQL estimate of a single bin can fall below the dark estimate.
    // Those bins have no reference and are left out (NaN) instead of failing the run.
    let referenced: Vec<usize> = (0..sql.len()).filter(|&k| sql.psd[k] > dark.psd[k]).collect();
    let unreferenced = sql.len() - referenced.len();
    let pick = |v: &[f64]| referenced.iter().map(|&k| v[k]).collect::<Vec<_>>();
    let (sql_ref, dark_ref) = (pick(&sql.psd), pick(&dark.psd));
    let normalized = |trace: &[f64]| -> RunResult<NormalizedTrace> {
        let sub = normalize_and_subtract(&pick(trace), &sql_ref, Some(&dark_ref))?;
        let mut db = vec![f64::NAN; sql.len()];
        for (&k, v) in referenced.iter().zip(sub.db) {
            db[k] = v;
        }
        let flagged = sub.flagged.iter().map(|&i| referenced[i]).collect();
        Ok(NormalizedTrace { db, flagged })
    };
    let sq_db = normalized(&sq.psd)?;
    let anti_db = normalized(&anti.psd)?;
    let sql_db = normalized(&sql.psd)?;

    let mut raw = Table::new(&["frequency_hz", "rbw_hz", "sql_db", "squeezed_db", "anti_squeezed_db"])
        .note("windows", config.spectrum.windows.len());
    for (k, f) in sql.frequencies.iter().enumerate() {
        raw.push(vec![*f, sql.rbw[k], sql_db.db[k], sq_db.db[k], anti_db.db[k]]);
    }
    let mut display = Table::new(&["frequency_hz", "squeezed_db", "anti_squeezed_db"]).note("points_per_decade", 50);
    let lin = |v: &[f64]| v.iter().map(|d| 10f64.powf(d / 10.0)).collect::<Vec<_>>();
    let sq_lin = log_resample(&sql.frequencies, &lin(&sq_db.db), 50);
    let anti_lin = log_resample(&sql.frequencies, &lin(&anti_db.db), 50);
    for ((f, s), (_, a)) in sq_lin.iter().zip(&anti_lin) {
        display.push(vec![*f, 10.0 * s.log10(), 10.0 * a.log10()]);
    }

    // Broadband levels over the flat band, away from the spurious lines.
    let [lo, hi] = config.spectrum.flat_band;
    let guard = config.spectrum.tone_guard;
    let near_tone = |f: f64| config.noise.tones.iter().any(|t| (t.frequency - f).abs() <= guard);
    let mut sums = [0.0; 4];
    let mut count = 0usize;
    for (k, &f) in sql.frequencies.iter().enumerate() {
        if f >= lo && f <= hi && !near_tone(f) {
            for (s, v) in sums.iter_mut().zip([sql.psd[k], sq.psd[k], anti.psd[k], dark.psd[k]]) {
                *s += v;
            }
            count += 1;
        }
    }
    let [s_sql, s_sq, s_anti, s_dark] = sums;

    let tones: Vec<_> = config
        .noise
        .tones
        .iter()
        .filter(|t| t.frequency >= sql.frequencies[0] && t.frequency <= *sql.frequencies.last().unwrap())
        .map(|t| {
            let (peak, peak_db) = sql
                .frequencies
                .iter()
                .zip(&sq_db.db)
                .filter(|(f, _)| (**f - t.frequency).abs() <= guard)
                .fold((f64::NAN, f64::NEG_INFINITY), |best, (f, d)| if *d > best.1 { (*f, *d) } else { best });
            json!({
                "configured_hz": t.frequency,
                "peak_hz": num(peak),
                "peak_squeezed_db": num(peak_db),
            })
        })
        .collect();

    let summary = json!({
        "flat_band_hz": [lo, hi],
        "flat_band_bins": count,
        "squeezing_db": num(relative_db(s_sq, s_sql, s_dark)),
        "anti_squeezing_db": num(relative_db(s_anti, s_sql, s_dark)),
        "bins": sql.len(),
        "flagged_bins": sq_db.flagged.len() + anti_db.flagged.len(),
        "unreferenced_bins": unreferenced,
        "tones": tones,
    });
    Ok(RunOutput::new(Meta::new("spectrum", config), summary)
        .with_table("raw", raw)
        .with_table("display", display))
}
