//! Lock demonstrations: the pump phase held by single-photon modulation locking, or the LO
//! phase held by quantum noise locking.

use opatwin_core::locking::{quantum_noise_lock, sml_lock, LockResult, SmlTarget};
use opatwin_core::noise::phase_random_walk;
use serde_json::json;

use super::{record_seed, RunResult};
use crate::config::ScenarioConfig;
use crate::export::{num, Meta, RunOutput, Table};

const SCENARIO: u64 = 3;
const DISTURBANCE_RATE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockLoop {
    /// Pump phase from SPCM count rates.
    Pump,
    /// LO phase from homodyne noise power.
    Lo,
}

impl LockLoop {
    fn name(self) -> &'static str {
        match self {
            LockLoop::Pump => "pump",
            LockLoop::Lo => "lo",
        }
    }
}

/// Runs one lock: open-loop scan, then `config.duration` seconds of closed-loop hold
/// against a random-walk phase disturbance.
///
/// For the pump loop, `target` selects the fringe maximum (`Zero`) or minimum (`Pi`) and
/// the matching operating point. The LO loop always holds the squeezed quadrature.
pub fn lock_demo(config: &ScenarioConfig, lock: LockLoop, target: SmlTarget) -> RunResult<(RunOutput, LockResult)> {
    config.validate()?;
    let l = &config.locks;
    let loop_cfg = match lock {
        LockLoop::Pump => &l.pump,
        LockLoop::Lo => &l.lo,
    };
    let span = loop_cfg.scan_duration + config.duration;
    let disturbance = phase_random_walk(
        DISTURBANCE_RATE,
        (span * DISTURBANCE_RATE).ceil() as usize + 2,
        l.disturbance_diffusion,
        record_seed(config, SCENARIO, 0, 0),
    )?;
    let seed = record_seed(config, SCENARIO, 1, 0);
    let (result, operating_point) = match lock {
        LockLoop::Pump => {
            let op = match target {
                SmlTarget::Zero => &l.pump_target_zero,
                SmlTarget::Pi => &l.pump_target_pi,
            };
            let r = sml_lock(
                &config.opa.with_pump_power(op.pump_power),
                op.probe_power,
                &config.spcm,
                &l.pump_plant,
                &l.pump,
                target,
                &disturbance,
                config.duration,
                seed,
            )?;
            (r, json!({"pump_power_mw": op.pump_power, "probe_power_nw": op.probe_power}))
        }
        LockLoop::Lo => {
            let r = quantum_noise_lock(
                &config.source()?,
                &config.detector,
                &config.noise.without_tones(),
                &l.lo_plant,
                &l.lo,
                &disturbance,
                config.duration,
                0,
                seed,
            )?;
            (r, json!({"pump_power_mw": config.opa.pump_power, "lo_power_mw": config.detector.lo_power}))
        }
    };

    // Observable rebinned for display: count rate for the pump loop, noise power for the LO loop.
    let obs = &result.observable;
    let per_bin = ((l.display_bin * obs.sample_rate()).round() as usize).max(1);
    let column = match lock {
        LockLoop::Pump => "count_rate_hz",
        LockLoop::Lo => "noise_power_rel_sql",
    };
    let mut trace = Table::new(&["time_s", column])
        .note("loop", lock.name())
        .note("bin_width_s", per_bin as f64 / obs.sample_rate())
        .note("engage_time_s", result.engage_time);
    for (b, chunk) in obs.samples().chunks_exact(per_bin).enumerate() {
        let t = (b * per_bin) as f64 / obs.sample_rate();
        trace.push(vec![t, chunk.iter().sum::<f64>() / per_bin as f64]);
    }

    let mut errors = Table::new(&["time_s", "phase_error_rad", "error_signal_rad"]).note("loop", lock.name());
    if let (Some(pe), Some(es)) = (&result.phase_error_series, &result.error_signal) {
        for (k, (p, e)) in pe.samples().iter().zip(es.samples()).enumerate() {
            errors.push(vec![result.engage_time + k as f64 / pe.sample_rate(), *p, *e]);
        }
    }

    let target_name = match (lock, target) {
        (LockLoop::Lo, _) => "squeezed",
        (_, SmlTarget::Zero) => "0",
        (_, SmlTarget::Pi) => "pi",
    };
    let summary = json!({
        "loop": lock.name(),
        "target": target_name,
        "operating_point": operating_point,
        "locked": result.locked,
        "rms_error_rad": num(result.rms_error),
        "acquisition_time_s": result.acquisition_time.map(num),
        "engage_time_s": result.engage_time,
        "hold_duration_s": config.duration,
        "fringe": {
            "offset": num(result.fringe.offset),
            "amplitude": num(result.fringe.amplitude),
            "amplitude_std_error": num(result.fringe.amplitude_std_error),
            "maximum_phase_rad": num(result.fringe.maximum_phase),
        },
        "diagnostic": result.diagnostic,
    });
    let out = RunOutput::new(Meta::new("lock-demo", config), summary)
        .with_table("observable", trace)
        .with_table("phase_error", errors);
    Ok((out, result))
}
