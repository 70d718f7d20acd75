//! Desk-scale digital twin of a sub-threshold OPA squeezed-light source.
//!
//! * [`physics`]: closed-form squeezing spectra, phase-jitter mixing, parametric gain.
//! * [`noise`]: seeded white, colored, power-law and phase-disturbance series.
//! * [`detection`]: balanced homodyne photocurrent and SPCM count synthesis.
//! * [`analyzer`]: FFT and zero-span spectrum analyzer emulation.
//! * [`locking`]: lock-in, PID, quantum noise locking and single-photon modulation locking.
//! * [`inference`]: phase-jitter and operating-point fits, stability metrics.
//!
//! Noise is expressed in photocurrent units where the vacuum (SQL) one-sided PSD is 1.

pub mod analyzer;
pub mod detection;
pub mod error;
mod fft;
pub mod inference;
pub mod locking;
pub mod noise;
pub mod physics;
pub mod series;

pub use error::{Error, Result};
pub use series::TimeSeries;
