//! Parameter recovery from measured squeezing/anti-squeezing pairs.
//!
//! Input is CSV with the columns `role,squeezing_db,anti_squeezing_db,frequency_hz` and an
//! optional `label`. `role` is `ideal` or `observed`. Lines starting with `#` are ignored.
//! Without an `ideal` row, the configured calibration pair is the reference.

use opatwin_core::inference::{fit_opa_operating_point, fit_phase_jitter, MeasurementPair};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{RunError, RunResult};
use crate::config::ScenarioConfig;
use crate::export::{num, Meta, RunOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Role {
    Ideal,
    Observed,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    role: Role,
    #[serde(default)]
    label: Option<String>,
    squeezing_db: f64,
    anti_squeezing_db: f64,
    frequency_hz: f64,
}

/// A pair read from the input, with its 1-based data row number.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub row: usize,
    pub label: String,
    pub ideal: bool,
    pub pair: MeasurementPair,
}

/// Parses the fit input. Errors name the failing row.
pub fn parse_pairs(text: &str) -> RunResult<Vec<LabeledPair>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.deserialize::<Row>().enumerate() {
        let row = i + 1;
        let r = rec.map_err(|e| RunError::Input(format!("row {row}: {e}")))?;
        for (name, v) in [
            ("squeezing_db", r.squeezing_db),
            ("anti_squeezing_db", r.anti_squeezing_db),
            ("frequency_hz", r.frequency_hz),
        ] {
            if !v.is_finite() {
                return Err(RunError::Input(format!("row {row}: {name} is not finite")));
            }
        }
        out.push(LabeledPair {
            row,
            label: r.label.unwrap_or_else(|| format!("row{row}")),
            ideal: r.role == Role::Ideal,
            pair: MeasurementPair::new(r.squeezing_db, r.anti_squeezing_db, r.frequency_hz),
        });
    }
    if out.is_empty() {
        return Err(RunError::Input("no data rows".into()));
    }
    if out.iter().filter(|p| p.ideal).count() > 1 {
        return Err(RunError::Input("at most one row may have role `ideal`".into()));
    }
    Ok(out)
}

fn operating_point(pair: &MeasurementPair) -> Value {
    match fit_opa_operating_point(pair) {
        Ok(op) => json!({
            "normalized_pump": num(op.normalized_pump),
            "total_efficiency": num(op.total_efficiency),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Fits phase jitter for every observed row against the ideal pair, and the operating
/// point of every row. `source_name` is echoed in the report.
pub fn fit(config: &ScenarioConfig, text: &str, source_name: &str) -> RunResult<RunOutput> {
    let pairs = parse_pairs(text)?;
    let ideal = match pairs.iter().find(|p| p.ideal) {
        Some(p) => p.pair,
        None => {
            let cal = config.calibration.as_ref().ok_or_else(|| {
                RunError::Input("no `ideal` row and no calibration pair in the configuration".into())
            })?;
            MeasurementPair::new(cal.squeezing_db, cal.anti_squeezing_db, 0.0)
        }
    };
    let rows: Vec<Value> = pairs
        .iter()
        .map(|p| {
            let mut v = json!({
                "row": p.row,
                "label": p.label,
                "role": if p.ideal { "ideal" } else { "observed" },
                "squeezing_db": p.pair.squeezing_db,
                "anti_squeezing_db": p.pair.anti_squeezing_db,
                "frequency_hz": p.pair.frequency,
                "operating_point": operating_point(&p.pair),
            });
            if !p.ideal {
                v["phase_jitter"] = match fit_phase_jitter(&p.pair, &ideal) {
                    Ok(f) => json!({
                        "rms_rad": num(f.jitter.rms),
                        "from_squeezing_rad": f.from_squeezing.map(num),
                        "from_anti_squeezing_rad": f.from_anti_squeezing.map(num),
                        "residual_db": num(f.residual_db),
                    }),
                    Err(e) => json!({ "error": e.to_string() }),
                };
            }
            v
        })
        .collect();
    let summary = json!({
        "input": {
            "source": source_name,
            "sha256": hex::encode(Sha256::digest(text.as_bytes())),
            "rows": pairs.len(),
        },
        "ideal": {
            "squeezing_db": ideal.squeezing_db,
            "anti_squeezing_db": ideal.anti_squeezing_db,
        },
        "results": rows,
    });
    Ok(RunOutput::new(Meta::new("fit", config), summary))
}
