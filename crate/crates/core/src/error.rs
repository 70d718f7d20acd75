use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {name} = {value} ({reason})")]
    ParameterDomain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("pump power {pump_mw} mW is at or above the oscillation threshold {threshold_mw} mW")]
    AboveThreshold { pump_mw: f64, threshold_mw: f64 },

    #[error("degenerate cavity: output coupling plus loss is zero")]
    DegenerateCavity,

    #[error("non-positive value {0} has no decibel representation")]
    NonPositiveLinear(f64),

    #[error("series too short: {required} samples required, {actual} given")]
    SeriesTooShort { required: usize, actual: usize },

    #[error("invalid time series: {0}")]
    InvalidSeries(&'static str),

    #[error("power spectral density is negative or not finite at {frequency} Hz")]
    NegativePsd { frequency: f64 },

    #[error("negative count rate {rate} Hz at sample {index}")]
    NegativeRate { index: usize, rate: f64 },

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: f64, actual: f64 },

    #[error("signal sampled at {sample_rate} Hz cannot carry a {frequency} Hz modulation")]
    Undersampled { sample_rate: f64, frequency: f64 },

    #[error("band {center} Hz +/- {half_width} Hz does not fit below Nyquist {nyquist} Hz")]
    InvalidBand {
        center: f64,
        half_width: f64,
        nyquist: f64,
    },

    #[error("trace shapes differ: {0}")]
    ShapeMismatch(String),

    #[error("SQL reference does not exceed dark noise at bin {index}")]
    SqlBelowDark { index: usize },

    #[error("no traces to average")]
    EmptyInput,

    #[error("inconsistent data: {0}")]
    InconsistentData(String),

    #[error("no operating point in the physical domain: {0}")]
    Infeasible(String),

    #[error("operating point is indeterminate: {0}")]
    Indeterminate(&'static str),

    #[error("plant produces no signal: {0}")]
    NoSignal(&'static str),
}

pub(crate) fn ensure(cond: bool, name: &'static str, value: f64, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::ParameterDomain {
            name,
            value,
            reason,
        })
    }
}
