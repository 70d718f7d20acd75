//! CSV and JSON artifacts with provenance headers.
//!
//! Every artifact records the tool version, the configuration hash and the seed. Nothing
//! time-dependent is written, so identical inputs give byte-identical files.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ScenarioConfig;

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance shared by all artifacts of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Meta {
    pub fn new(command: &str, config: &ScenarioConfig) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            config_sha256: config.hash(),
            seed: config.seed,
        }
    }
}

/// Column-oriented table written as CSV with `# key: value` header lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            header: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn note(mut self, key: &str, value: impl ToString) -> Self {
        self.header.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, meta: &Meta) -> String {
        let mut out = String::new();
        for (k, v) in [
            ("tool", meta.tool.as_str()),
            ("version", meta.version.as_str()),
            ("command", meta.command.as_str()),
            ("config_sha256", meta.config_sha256.as_str()),
        ] {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&format!("# seed: {}\n", meta.seed));
        for (k, v) in &self.header {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8"));
        out
    }
}

/// Named file contents produced by a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
}

/// Everything one command produces: data tables and a JSON summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub meta: Meta,
    pub tables: Vec<(String, Table)>,
    pub summary: Value,
}

impl RunOutput {
    pub fn new(meta: Meta, summary: Value) -> Self {
        Self {
            meta,
            tables: Vec::new(),
            summary,
        }
    }

    pub fn with_table(mut self, name: &str, table: Table) -> Self {
        self.tables.push((name.into(), table));
        self
    }

    pub fn summary_json(&self) -> String {
        let doc = json!({ "meta": self.meta, "summary": self.summary });
        let mut s = serde_json::to_string_pretty(&doc).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn artifacts(&self) -> Vec<Artifact> {
        let mut out: Vec<Artifact> = self
            .tables
            .iter()
            .map(|(name, t)| Artifact {
                file_name: format!("{}_{name}.csv", self.meta.command),
                contents: t.to_csv(&self.meta),
            })
            .collect();
        out.push(Artifact {
            file_name: format!("{}_summary.json", self.meta.command),
            contents: self.summary_json(),
        });
        out
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        self.artifacts()
            .into_iter()
            .map(|a| {
                let path = dir.join(&a.file_name);
                std::fs::write(&path, a.contents)?;
                Ok(path)
            })
            .collect()
    }
}

/// JSON number that tolerates NaN and infinities by writing null.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}
