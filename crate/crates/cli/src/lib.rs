//! Batch front end of the squeezed-light twin: scenario configuration, figure scenarios,
//! acceptance checks and data export.

pub mod config;
pub mod export;
pub mod scenarios;
pub mod validate;

pub use config::{ConfigError, ScenarioConfig};
pub use export::RunOutput;
