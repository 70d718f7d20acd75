//! Spectrum-analyzer emulation.
//!
//! FFT mode is Welch averaging with a periodic Hann window whose equivalent noise bandwidth
//! equals the requested RBW. Spectra carry a one-sided power spectral density; the power
//! an analyzer would display in one RBW is `psd · enbw`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fft;
use crate::series::TimeSeries;

/// Equivalent noise bandwidth of the Hann window in bins.
pub const HANN_ENBW_BINS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AnalyzerMode {
    #[default]
    Fft,
    ZeroSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Hann,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }

    pub fn enbw_bins(self) -> f64 {
        match self {
            Window::Hann => HANN_ENBW_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default)]
    pub mode: AnalyzerMode,
    pub rbw: f64,
    pub vbw: f64,
    /// Lower edge of the displayed range (FFT mode) or the center frequency (zero span).
    pub start_or_center: f64,
    /// Upper edge of the displayed range in FFT mode; ignored in zero span.
    #[serde(default)]
    pub stop: Option<f64>,
    pub averages: usize,
    #[serde(default)]
    pub window: Window,
}

impl SpectrumConfig {
    pub fn fft(start: f64, stop: f64, rbw: f64, vbw: f64, averages: usize) -> Self {
        Self {
            mode: AnalyzerMode::Fft,
            rbw,
            vbw,
            start_or_center: start,
            stop: Some(stop),
            averages,
            window: Window::Hann,
        }
    }

    pub fn zero_span(center: f64, rbw: f64, vbw: f64, averages: usize) -> Self {
        Self {
            mode: AnalyzerMode::ZeroSpan,
            rbw,
            vbw,
            start_or_center: center,
            stop: None,
            averages,
            window: Window::Hann,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.rbw > 0.0 && self.rbw.is_finite(), "rbw", self.rbw, "must be positive")?;
        ensure(
            self.vbw > 0.0 && self.vbw <= self.rbw,
            "vbw",
            self.vbw,
            "must be positive and not exceed rbw",
        )?;
        ensure(
            self.averages >= 1,
            "averages",
            self.averages as f64,
            "must be at least 1",
        )?;
        ensure(
            self.start_or_center >= 0.0,
            "start_or_center",
            self.start_or_center,
            "must be non-negative",
        )?;
        if let Some(stop) = self.stop {
            ensure(
                stop > self.start_or_center,
                "stop",
                stop,
                "must exceed the start frequency",
            )?;
        }
        Ok(())
    }

    /// FFT segment length giving an ENBW of `rbw` at `sample_rate`.
    pub fn segment_length(&self, sample_rate: f64) -> usize {
        segment_length(sample_rate, self.rbw, self.window)
    }
}

fn segment_length(sample_rate: f64, rbw: f64, window: Window) -> usize {
    ((window.enbw_bins() * sample_rate / rbw).round() as usize).max(2)
}

/// Binned one-sided power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub frequencies: Vec<f64>,
    pub psd: Vec<f64>,
    /// Requested resolution bandwidth.
    pub rbw: f64,
    pub vbw: f64,
    /// Realized window equivalent noise bandwidth in Hz.
    pub enbw: f64,
    pub bin_spacing: f64,
    pub n_averages: usize,
}

impl PowerSpectrum {
    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }

    /// Power displayed in one RBW at bin `index`.
    pub fn band_power(&self, index: usize) -> f64 {
        self.psd[index] * self.enbw
    }

    /// `Σ psd · Δf` over the retained bins.
    pub fn integrated_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.bin_spacing
    }

    /// Index of the bin closest to `frequency`.
    pub fn nearest_bin(&self, frequency: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &f) in self.frequencies.iter().enumerate() {
            let d = (f - frequency).abs();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    /// Mean PSD over bins with `lo ≤ f ≤ hi`, skipping bins `excluded` rejects.
    pub fn mean_psd_in(&self, lo: f64, hi: f64, excluded: impl Fn(f64) -> bool) -> Option<f64> {
        let (sum, n) = self
            .frequencies
            .iter()
            .zip(&self.psd)
            .filter(|(&f, _)| f >= lo && f <= hi && !excluded(f))
            .fold((0.0, 0usize), |(s, n), (_, &p)| (s + p, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Keeps bins with `lo ≤ f ≤ hi`.
    pub fn crop(&self, lo: f64, hi: f64) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.frequencies[i] >= lo && self.frequencies[i] <= hi)
            .collect();
        Self {
            frequencies: keep.iter().map(|&i| self.frequencies[i]).collect(),
            psd: keep.iter().map(|&i| self.psd[i]).collect(),
            ..self.clone()
        }
    }
}

/// Welch-averaged one-sided PSD with 50 % overlapping segments.
///
/// The result spans DC to Nyquist, cropped to `[start, stop]` when `stop` is set, and is
/// smoothed by the video bandwidth.
pub fn fft_spectrum(series: &TimeSeries, config: &SpectrumConfig) -> Result<PowerSpectrum> {
    config.validate()?;
    let fs = series.sample_rate();
    let n = config.segment_length(fs);
    let x = series.samples();
    if x.len() < n {
        return Err(Error::SeriesTooShort {
            required: n,
            actual: x.len(),
        });
    }
    let w = config.window.coefficients(n);
    let w_sum2: f64 = w.iter().map(|v| v * v).sum();
    let hop = (n / 2).max(1);
    let n_half = n / 2 + 1;
    let mut acc = vec![0.0; n_half];
    let mut segments = 0;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0;
    while start + n <= x.len() {
        for (b, (&xi, &wi)) in buf.iter_mut().zip(x[start..start + n].iter().zip(&w)) {
            *b = Complex64::new(xi * wi, 0.0);
        }
        fft::forward(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf[..n_half]) {
            *a += c.norm_sqr();
        }
        segments += 1;
        start += hop;
    }
    let scale = 1.0 / (fs * w_sum2 * segments as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let one_sided = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let bin_spacing = fs / n as f64;
    let spectrum = PowerSpectrum {
        frequencies: (0..n_half).map(|k| k as f64 * bin_spacing).collect(),
        psd: video_smooth(&psd, config.rbw, config.vbw),
        rbw: config.rbw,
        vbw: config.vbw,
        enbw: fs * w_sum2 / w.iter().sum::<f64>().powi(2),
        bin_spacing,
        n_averages: segments,
    };
    Ok(match config.stop {
        Some(stop) => spectrum.crop(config.start_or_center, stop),
        None => spectrum,
    })
}

/// Centered moving average over `round(rbw / vbw)` points, shrinking at the edges.
fn video_smooth(values: &[f64], rbw: f64, vbw: f64) -> Vec<f64> {
    let m = (rbw / vbw).round().max(1.0) as usize;
    if m <= 1 {
        return values.to_vec();
    }
    let half_lo = (m - 1) / 2;
    let half_hi = m / 2;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half_lo);
            let hi = (i + half_hi + 1).min(values.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Multi-window spectrum assembled from consecutive analyzer windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchedSpectrum {
    pub frequencies: Vec<f64>,
    pub psd: Vec<f64>,
    /// RBW of the window each bin came from.
    pub rbw: Vec<f64>,
}

impl StitchedSpectrum {
    pub fn len(&self) -> usize {
        self.psd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psd.is_empty()
    }
}

/// Joins windows ordered by start frequency. Each window contributes the bins below the
/// first bin of the next window, so frequencies are strictly increasing.
pub fn stitch(windows: &[PowerSpectrum]) -> Result<StitchedSpectrum> {
    if windows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = StitchedSpectrum {
        frequencies: Vec::new(),
        psd: Vec::new(),
        rbw: Vec::new(),
    };
    for (i, w) in windows.iter().enumerate() {
        let upper = windows
            .get(i + 1)
            .and_then(|next| next.frequencies.first().copied())
            .unwrap_or(f64::INFINITY);
        let lower = out.frequencies.last().copied().unwrap_or(f64::NEG_INFINITY);
        for (&f, &p) in w.frequencies.iter().zip(&w.psd) {
            if f > lower && f < upper {
                out.frequencies.push(f);
                out.psd.push(p);
                out.rbw.push(w.rbw);
            }
        }
    }
    Ok(out)
}

/// Averages values into logarithmically spaced frequency bins, for display.
/// Returns `(geometric bin center, mean value)` for every non-empty bin.
pub fn log_resample(frequencies: &[f64], values: &[f64], points_per_decade: usize) -> Vec<(f64, f64)> {
    let ppd = points_per_decade.max(1) as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut current: Option<(i64, f64, usize)> = None;
    for (&f, &v) in frequencies.iter().zip(values) {
        if f <= 0.0 || !v.is_finite() {
            continue;
        }
        let bin = (f.log10() * ppd).floor() as i64;
        match current {
            Some((b, sum, n)) if b == bin => current = Some((b, sum + v, n + 1)),
            _ => {
                if let Some((b, sum, n)) = current {
                    out.push((10f64.powf((b as f64 + 0.5) / ppd), sum / n as f64));
                }
                current = Some((bin, v, 1));
            }
        }
    }
    if let Some((b, sum, n)) = current {
        out.push((10f64.powf((b as f64 + 0.5) / ppd), sum / n as f64));
    }
    out
}

/// Zero-span band power versus time.
///
/// The record is band-pass filtered around `center` with a Gaussian response whose noise
/// bandwidth is `rbw`, power detected, then smoothed by a one-pole video filter with cutoff
/// `vbw`. A tone of amplitude `A` in band reads `A²/2`; white noise of PSD `S₀` reads
/// `S₀ · rbw`.
pub fn zero_span(series: &TimeSeries, center: f64, rbw: f64, vbw: f64) -> Result<TimeSeries> {
    ensure(rbw > 0.0, "rbw", rbw, "must be positive")?;
    ensure(vbw > 0.0, "vbw", vbw, "must be positive")?;
    let fs = series.sample_rate();
    let nyquist = series.nyquist();
    if !(center - rbw / 2.0 > 0.0 && center + rbw / 2.0 < nyquist) {
        return Err(Error::InvalidBand {
            center,
            half_width: rbw / 2.0,
            nyquist,
        });
    }
    let n = series.len();
    let mut buf: Vec<Complex64> = series.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::forward(&mut buf);
    let sigma = rbw / PI.sqrt();
    for (k, c) in buf.iter_mut().enumerate() {
        let f = fft::bin_frequency(k, n, fs);
        let g = if f > 0.0 {
            let d = (f - center) / sigma;
            (-0.5 * d * d).exp()
        } else {
            0.0
        };
        *c *= g / n as f64;
    }
    fft::inverse(&mut buf);
    let power: Vec<f64> = buf.iter().map(|z| 2.0 * z.norm_sqr()).collect();

    let alpha = 1.0 - (-2.0 * PI * vbw / fs).exp();
    let settle = ((fs / vbw).round() as usize).clamp(1, n);
    let mut state = power[..settle].iter().sum::<f64>() / settle as f64;
    let smoothed = power
        .iter()
        .map(|&p| {
            state += alpha * (p - state);
            state
        })
        .collect();
    TimeSeries::new(fs, smoothed)
}

/// Trace types that can be RMS-averaged point by point.
pub trait RmsAverage: Sized {
    fn rms_average(traces: &[Self]) -> Result<Self>;
}

/// Point-by-point average of power-valued traces.
///
/// Inputs are powers (PSD bins or detected band power), so the RMS of the underlying
/// amplitude is carried by the mean power.
pub fn rms_average<T: RmsAverage>(traces: &[T]) -> Result<T> {
    T::rms_average(traces)
}

fn mean_columns<'a>(rows: impl Iterator<Item = &'a [f64]>, len: usize) -> Vec<f64> {
    let mut acc = vec![0.0; len];
    let mut count = 0usize;
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    acc
}

impl RmsAverage for PowerSpectrum {
    fn rms_average(traces: &[Self]) -> Result<Self> {
        let first = traces.first().ok_or(Error::EmptyInput)?;
        for (i, t) in traces.iter().enumerate() {
            if t.frequencies != first.frequencies {
                return Err(Error::ShapeMismatch(format!(
                    "spectrum {i} has {} bins with a different frequency axis",
                    t.len()
                )));
            }
        }
        let n_averages = traces.iter().map(|t| t.n_averages).sum();
        Ok(Self {
            psd: mean_columns(traces.iter().map(|t| t.psd.as_slice()), first.len()),
            n_averages,
            ..first.clone()
        })
    }
}

impl RmsAverage for TimeSeries {
    fn rms_average(traces: &[Self]) -> Result<Self> {
        let first = traces.first().ok_or(Error::EmptyInput)?;
        for (i, t) in traces.iter().enumerate() {
            if t.len() != first.len() || t.sample_rate() != first.sample_rate() {
                return Err(Error::ShapeMismatch(format!(
                    "trace {i} has {} samples at {} Hz, expected {} at {} Hz",
                    t.len(),
                    t.sample_rate(),
                    first.len(),
                    first.sample_rate()
                )));
            }
        }
        TimeSeries::new(
            first.sample_rate(),
            mean_columns(traces.iter().map(|t| t.samples()), first.len()),
        )
    }
}

/// Dark-subtracted, SQL-normalized trace in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedTrace {
    /// `10 log10((trace − dark) / (sql − dark))`; NaN at flagged bins.
    pub db: Vec<f64>,
    /// Bins where the trace did not exceed the dark level.
    pub flagged: Vec<usize>,
}

pub fn normalize_and_subtract(trace: &[f64], sql: &[f64], dark: Option<&[f64]>) -> Result<NormalizedTrace> {
    if trace.len() != sql.len() {
        return Err(Error::ShapeMismatch(format!(
            "trace has {} bins, SQL reference has {}",
            trace.len(),
            sql.len()
        )));
    }
    if let Some(d) = dark {
        if d.len() != trace.len() {
            return Err(Error::ShapeMismatch(format!(
                "trace has {} bins, dark reference has {}",
                trace.len(),
                d.len()
            )));
        }
    }
    let mut db = Vec::with_capacity(trace.len());
    let mut flagged = Vec::new();
    for i in 0..trace.len() {
        let d = dark.map_or(0.0, |d| d[i]);
        let reference = sql[i] - d;
        if reference <= 0.0 {
            return Err(Error::SqlBelowDark { index: i });
        }
        let signal = trace[i] - d;
        if signal <= 0.0 {
            flagged.push(i);
            db.push(f64::NAN);
        } else {
            db.push(10.0 * (signal / reference).log10());
        }
    }
    Ok(NormalizedTrace { db, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::white_noise;

    fn sine(fs: f64, n: usize, f: f64, a: f64) -> TimeSeries {
        TimeSeries::new(
            fs,
            (0..n).map(|i| a * (2.0 * PI * f * i as f64 / fs).sin()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn segment_length_matches_rbw() {
        let cfg = SpectrumConfig::fft(0.0, 500.0, 2.0, 2.0, 1);
        let n = cfg.segment_length(1000.0);
        assert_eq!(n, 750);
        let s = fft_spectrum(&white_noise(1000.0, 4 * n, 1.0, 1).unwrap(), &cfg).unwrap();
        assert!((s.enbw - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_short_reports_required_length() {
        let cfg = SpectrumConfig::fft(0.0, 500.0, 1.0, 1.0, 1);
        let err = fft_spectrum(&white_noise(1000.0, 100, 1.0, 1).unwrap(), &cfg).unwrap_err();
        assert_eq!(
            err,
            Error::SeriesTooShort {
                required: 1500,
                actual: 100
            }
        );
        assert!(err.to_string().contains("1500 samples required"));
    }

    #[test]
    fn parseval_on_white_noise() {
        let fs = 1000.0;
        let s = white_noise(fs, 200_000, 1.0, 3).unwrap();
        let cfg = SpectrumConfig {
            stop: None,
            ..SpectrumConfig::fft(0.0, fs / 2.0, 5.0, 5.0, 1)
        };
        let p = fft_spectrum(&s, &cfg).unwrap();
        let ratio = p.integrated_power() / s.variance();
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn tone_power_at_bin_center() {
        let fs = 1000.0;
        let cfg = SpectrumConfig::fft(0.0, 500.0, 3.0, 3.0, 1);
        let n = cfg.segment_length(fs);
        let df = fs / n as f64;
        let f0 = 40.0 * df;
        let s = fft_spectrum(&sine(fs, 10 * n, f0, 0.8), &cfg).unwrap();
        let k = s.nearest_bin(f0);
        let db = 10.0 * (s.band_power(k) / (0.8 * 0.8 / 2.0)).log10();
        assert!(db.abs() < 0.1, "tone error {db} dB");
    }

    #[test]
    fn vbw_preserves_integrated_power() {
        let s = white_noise(1000.0, 100_000, 1.0, 4).unwrap();
        let a = fft_spectrum(&s, &SpectrumConfig::fft(0.0, 500.0, 5.0, 5.0, 1)).unwrap();
        let b = fft_spectrum(&s, &SpectrumConfig::fft(0.0, 500.0, 5.0, 0.5, 1)).unwrap();
        let change = (b.integrated_power() / a.integrated_power() - 1.0).abs();
        assert!(change < 0.005, "change {change}");
    }

    #[test]
    fn stitch_has_no_duplicates() {
        let fs = 4000.0;
        let s = white_noise(fs, 40_000, 1.0, 5).unwrap();
        let a = fft_spectrum(&s, &SpectrumConfig::fft(10.0, 1000.0, 1.0, 1.0, 1)).unwrap();
        let b = fft_spectrum(&s, &SpectrumConfig::fft(1000.0, 2000.0, 2.0, 2.0, 1)).unwrap();
        let st = stitch(&[a, b]).unwrap();
        assert!(st.frequencies.windows(2).all(|w| w[1] > w[0]));
        assert!(st.frequencies[0] >= 10.0);
        assert!(*st.frequencies.last().unwrap() <= 2000.0);
        assert!(stitch(&[]).is_err());
    }

    #[test]
    fn zero_span_tone_and_noise() {
        let fs = 1000.0;
        let n = 20_000;
        let tone = sine(fs, n, 70.0, 2.0);
        let out = zero_span(&tone, 70.0, 30.0, 1.0).unwrap();
        let m = out.mean();
        assert!((m / 2.0 - 1.0).abs() < 0.02, "tone power {m}");

        let off = zero_span(&sine(fs, n, 200.0, 2.0), 70.0, 30.0, 1.0).unwrap();
        assert!(off.mean() < 1e-4 * m);

        // Unit-variance white noise at 1 kHz has PSD 2/fs.
        let w = white_noise(fs, 400_000, 1.0, 9).unwrap();
        let wz = zero_span(&w, 70.0, 30.0, 1.0).unwrap();
        let expected = 2.0 / fs * 30.0;
        assert!((wz.mean() / expected - 1.0).abs() < 0.05, "noise power {}", wz.mean());
    }

    #[test]
    fn zero_span_rejects_bad_band() {
        let w = white_noise(100.0, 1000, 1.0, 1).unwrap();
        assert!(matches!(zero_span(&w, 49.0, 5.0, 1.0), Err(Error::InvalidBand { .. })));
    }

    #[test]
    fn rms_average_identities() {
        let a = TimeSeries::new(1.0, vec![2.0, 2.0, 2.0]).unwrap();
        assert_eq!(rms_average(std::slice::from_ref(&a)).unwrap(), a);
        assert_eq!(rms_average(&[a.clone(), a.clone(), a.clone()]).unwrap(), a);
        let b = TimeSeries::new(1.0, vec![1.0, 1.0]).unwrap();
        assert!(matches!(rms_average(&[a, b]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(rms_average::<TimeSeries>(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn normalization_cases() {
        let sql = vec![1.0, 2.0, 4.0];
        let n = normalize_and_subtract(&sql, &sql, None).unwrap();
        assert!(n.db.iter().all(|&v| v == 0.0));
        let doubled: Vec<f64> = sql.iter().map(|v| 2.0 * v).collect();
        let n = normalize_and_subtract(&doubled, &sql, None).unwrap();
        assert!(n.db.iter().all(|&v| (v - 3.0103).abs() < 1e-4));
        let dark: Vec<f64> = sql.iter().map(|v| 0.1 * v).collect();
        let n = normalize_and_subtract(&sql, &sql, Some(&dark)).unwrap();
        assert!(n.db.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalization_flags_bins_below_dark() {
        let n = normalize_and_subtract(&[0.5, 2.0], &[2.0, 2.0], Some(&[1.0, 1.0])).unwrap();
        assert_eq!(n.flagged, vec![0]);
        assert!(n.db[0].is_nan());
        assert!(matches!(
            normalize_and_subtract(&[2.0], &[1.0], Some(&[1.0])),
            Err(Error::SqlBelowDark { index: 0 })
        ));
    }

    #[test]
    fn log_resample_bins() {
        let f: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        let v = vec![1.0; 1000];
        let r = log_resample(&f, &v, 10);
        assert!(r.windows(2).all(|w| w[1].0 > w[0].0));
        assert!(r.iter().all(|&(_, m)| m == 1.0));
    }
}
