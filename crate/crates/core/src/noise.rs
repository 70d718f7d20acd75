//! Seeded noise generators.
//!
//! Every generator is a pure function of its arguments and a 64-bit seed. Randomness comes
//! from ChaCha8 streams; independent traces use seeds produced by [`derive_seed`].
//!
//! PSD convention: one-sided, so a series with PSD `S(f)` has variance `∫₀^{fs/2} S df`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::fft;
use crate::series::TimeSeries;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `index` of `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn white_noise(sample_rate: f64, count: usize, sigma: f64, seed: u64) -> Result<TimeSeries> {
    ensure(sigma >= 0.0 && sigma.is_finite(), "sigma", sigma, "must be non-negative")?;
    let mut r = rng(seed);
    let samples = (0..count).map(|_| sigma * gaussian(&mut r)).collect();
    TimeSeries::new(sample_rate, samples)
}

/// Gaussian series whose one-sided PSD follows `psd` (evaluated at every positive DFT bin).
///
/// Synthesis is circular: complex Gaussian coefficients scaled by `sqrt(S(f) Δf)` are
/// inverse transformed. The DC bin is zeroed, so the output has zero mean.
pub fn colored_noise_from_psd<F>(psd: F, sample_rate: f64, count: usize, seed: u64) -> Result<TimeSeries>
where
    F: Fn(f64) -> f64,
{
    let samples = shaped_noise(&psd, sample_rate, count, &mut rng(seed))?;
    TimeSeries::new(sample_rate, samples)
}

pub(crate) fn shaped_noise<F>(psd: &F, sample_rate: f64, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    ensure(
        sample_rate > 0.0 && sample_rate.is_finite(),
        "sample_rate",
        sample_rate,
        "must be positive",
    )?;
    if count == 0 {
        return Err(Error::InvalidSeries("series must contain at least one sample"));
    }
    let n = count;
    let df = sample_rate / n as f64;
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let f = k as f64 * df;
        let s = psd(f);
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::NegativePsd { frequency: f });
        }
        let g1 = gaussian(rng);
        let g2 = gaussian(rng);
        if 2 * k == n {
            spec[k] = Complex64::new((s * df / 2.0).sqrt() * g1, 0.0);
        } else {
            let a = (s * df / 4.0).sqrt();
            spec[k] = Complex64::new(a * g1, a * g2);
            spec[n - k] = spec[k].conj();
        }
    }
    fft::inverse(&mut spec);
    Ok(spec.into_iter().map(|c| c.re).collect())
}

/// Gaussian noise with PSD `scale · f^(-alpha)`, where `scale` is the PSD at 1 Hz.
pub fn power_law_noise(sample_rate: f64, count: usize, alpha: f64, scale: f64, seed: u64) -> Result<TimeSeries> {
    ensure((0.0..=3.0).contains(&alpha), "alpha", alpha, "must lie in [0, 3]")?;
    ensure(scale >= 0.0 && scale.is_finite(), "scale", scale, "must be non-negative")?;
    // Need several bins per decade below Nyquist for the slope to be meaningful.
    const MIN_COUNT: usize = 64;
    if count < MIN_COUNT {
        return Err(Error::SeriesTooShort {
            required: MIN_COUNT,
            actual: count,
        });
    }
    colored_noise_from_psd(|f| scale * f.powf(-alpha), sample_rate, count, seed)
}

/// Wiener process starting at zero with `Var[θ(t)] = diffusion · t`.
pub fn phase_random_walk(sample_rate: f64, count: usize, diffusion: f64, seed: u64) -> Result<TimeSeries> {
    ensure(
        diffusion >= 0.0 && diffusion.is_finite(),
        "diffusion",
        diffusion,
        "must be non-negative",
    )?;
    let step = (diffusion / sample_rate).sqrt();
    let mut r = rng(seed);
    let mut theta = 0.0;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        samples.push(theta);
        theta += step * gaussian(&mut r);
    }
    TimeSeries::new(sample_rate, samples)
}

/// Stationary Ornstein–Uhlenbeck process with a given RMS and corner frequency.
#[derive(Debug, Clone)]
pub struct OuProcess {
    decay: f64,
    drive: f64,
    rms: f64,
    state: Option<f64>,
}

impl OuProcess {
    pub fn new(sample_rate: f64, rms: f64, corner_frequency: f64) -> Result<Self> {
        ensure(rms >= 0.0 && rms.is_finite(), "rms", rms, "must be non-negative")?;
        ensure(
            corner_frequency > 0.0,
            "corner_frequency",
            corner_frequency,
            "must be positive",
        )?;
        let decay = (-2.0 * std::f64::consts::PI * corner_frequency / sample_rate).exp();
        Ok(Self {
            decay,
            drive: rms * (1.0 - decay * decay).sqrt(),
            rms,
            state: None,
        })
    }

    pub fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        let g = gaussian(rng);
        let next = match self.state {
            None => self.rms * g,
            Some(s) => self.decay * s + self.drive * g,
        };
        self.state = Some(next);
        next
    }
}

/// Slow Gaussian phase jitter: OU process with RMS `rms` and corner `corner_frequency`.
pub fn phase_jitter_series(
    sample_rate: f64,
    count: usize,
    rms: f64,
    corner_frequency: f64,
    seed: u64,
) -> Result<TimeSeries> {
    let mut ou = OuProcess::new(sample_rate, rms, corner_frequency)?;
    let mut r = rng(seed);
    TimeSeries::new(sample_rate, (0..count).map(|_| ou.next(&mut r)).collect())
}

/// Power-law laser technical noise, referenced to the detector input before common-mode
/// rejection: `PSD(f) = level_at_corner · (corner_frequency / f)^slope_alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnicalNoise {
    pub corner_frequency: f64,
    pub slope_alpha: f64,
    pub level_at_corner: f64,
}

impl Default for TechnicalNoise {
    /// Unit slope, equal to the shot-noise level at 1 kHz.
    fn default() -> Self {
        Self {
            corner_frequency: 1e3,
            slope_alpha: 1.0,
            level_at_corner: 1.0,
        }
    }
}

impl TechnicalNoise {
    pub fn off() -> Self {
        Self {
            level_at_corner: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.corner_frequency > 0.0,
            "technical_noise.corner_frequency",
            self.corner_frequency,
            "must be positive",
        )?;
        ensure(
            (0.5..=3.0).contains(&self.slope_alpha),
            "technical_noise.slope_alpha",
            self.slope_alpha,
            "must lie in [0.5, 3]",
        )?;
        ensure(
            self.level_at_corner >= 0.0 && self.level_at_corner.is_finite(),
            "technical_noise.level_at_corner",
            self.level_at_corner,
            "must be non-negative",
        )
    }

    pub fn is_off(&self) -> bool {
        self.level_at_corner == 0.0
    }

    pub fn psd(&self, frequency: f64) -> f64 {
        if self.is_off() {
            return 0.0;
        }
        self.level_at_corner * (self.corner_frequency / frequency).powf(self.slope_alpha)
    }
}

/// Spurious sinusoid; `amplitude` is its RMS value, so it carries power `amplitude²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    pub frequency: f64,
    pub amplitude: f64,
}

impl Tone {
    pub fn new(frequency: f64, amplitude: f64) -> Self {
        Self {
            frequency,
            amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseScenario {
    /// Quantum noise scale, 1.0 = SQL.
    pub shot_level: f64,
    pub technical_noise: TechnicalNoise,
    #[serde(default)]
    pub tones: Vec<Tone>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseScenario {
    fn default() -> Self {
        Self {
            shot_level: 1.0,
            technical_noise: TechnicalNoise::default(),
            tones: Vec::new(),
            seed: 0,
        }
    }
}

impl NoiseScenario {
    /// Shot noise only.
    pub fn quiet() -> Self {
        Self {
            technical_noise: TechnicalNoise::off(),
            ..Self::default()
        }
    }

    /// Spurious lines observed on the squeezed-light spectrum: circuit pickup at 25, 30, 50
    /// and 160 Hz, and the lock-in modulation at 34 kHz with its 238 kHz harmonic.
    pub fn spurious_tones() -> Vec<Tone> {
        vec![
            Tone::new(25.0, 1.0),
            Tone::new(30.0, 0.7),
            Tone::new(50.0, 0.7),
            Tone::new(160.0, 1.0),
            Tone::new(34e3, 2.0),
            Tone::new(238e3, 1.0),
        ]
    }

    pub fn without_tones(&self) -> Self {
        Self {
            tones: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(
            self.shot_level > 0.0 && self.shot_level.is_finite(),
            "shot_level",
            self.shot_level,
            "must be positive",
        )?;
        self.technical_noise.validate()?;
        for t in &self.tones {
            ensure(t.frequency > 0.0, "tone.frequency", t.frequency, "must be positive")?;
            ensure(
                t.amplitude >= 0.0 && t.amplitude.is_finite(),
                "tone.amplitude",
                t.amplitude,
                "must be non-negative",
            )?;
        }
        Ok(())
    }
}

/// Sum of the configured tones with seeded random phases. Tones at or above Nyquist are
/// left out, as an anti-aliasing front end would remove them.
pub fn tone_samples(tones: &[Tone], sample_rate: f64, count: usize, start_time: f64, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut out = vec![0.0; count];
    let mut r = rng(seed);
    for tone in tones {
        let phase: f64 = r.random::<f64>() * std::f64::consts::TAU;
        if tone.frequency >= 0.5 * sample_rate {
            continue;
        }
        let peak = tone.amplitude * std::f64::consts::SQRT_2;
        let w = std::f64::consts::TAU * tone.frequency;
        for (i, o) in out.iter_mut().enumerate() {
            let t = start_time + i as f64 / sample_rate;
            *o += peak * (w * t + phase).sin();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_zero_sigma() {
        let s = white_noise(1e3, 100, 0.0, 1).unwrap();
        assert!(s.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_variance() {
        let s = white_noise(1e3, 1_000_000, 1.0, 42).unwrap();
        let v = s.variance();
        assert!((0.99..=1.01).contains(&v), "variance {v}");
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(white_noise(1e3, 1000, 1.0, 7).unwrap(), white_noise(1e3, 1000, 1.0, 7).unwrap());
        assert_ne!(white_noise(1e3, 1000, 1.0, 7).unwrap(), white_noise(1e3, 1000, 1.0, 8).unwrap());
        assert_eq!(
            power_law_noise(1e3, 4096, 1.0, 1.0, 3).unwrap(),
            power_law_noise(1e3, 4096, 1.0, 1.0, 3).unwrap()
        );
        assert_eq!(
            phase_random_walk(1e3, 100, 1e-3, 9).unwrap(),
            phase_random_walk(1e3, 100, 1e-3, 9).unwrap()
        );
    }

    #[test]
    fn derived_seeds_are_independent() {
        let n = 1_000_000;
        let a = white_noise(1.0, n, 1.0, derive_seed(11, 0)).unwrap();
        let b = white_noise(1.0, n, 1.0, derive_seed(11, 1)).unwrap();
        let r: f64 = a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| x * y)
            .sum::<f64>()
            / (n as f64 * a.variance().sqrt() * b.variance().sqrt());
        assert!(r.abs() < 0.01, "cross-correlation {r}");
        assert_ne!(derive_seed(11, 0), derive_seed(11, 1));
        assert_ne!(derive_seed(11, 0), derive_seed(12, 0));
    }

    #[test]
    fn power_law_edge_cases() {
        let z = power_law_noise(1e3, 1024, 1.0, 0.0, 1).unwrap();
        assert!(z.samples().iter().all(|&v| v == 0.0));
        assert!(matches!(
            power_law_noise(1e3, 16, 1.0, 1.0, 1),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(power_law_noise(1e3, 1024, 3.5, 1.0, 1).is_err());
    }

    #[test]
    fn constant_psd_variance_is_nyquist() {
        // Unit PSD over [0, fs/2] integrates to fs/2 (less the empty DC bin).
        let fs = 2000.0;
        let n = 1 << 18;
        let s = colored_noise_from_psd(|_| 1.0, fs, n, 5).unwrap();
        let v = s.variance();
        assert!((v / (fs / 2.0) - 1.0).abs() < 0.01, "variance {v}");
    }

    #[test]
    fn colored_noise_rejects_negative_psd() {
        let err = colored_noise_from_psd(|f| if f > 100.0 { -1.0 } else { 1.0 }, 1e3, 1000, 1).unwrap_err();
        assert!(matches!(err, Error::NegativePsd { .. }));
    }

    #[test]
    fn random_walk_zero_diffusion() {
        let s = phase_random_walk(10.0, 100, 0.0, 1).unwrap();
        assert!(s.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_walk_ensemble_variance() {
        // Var θ(100 s) = 1e-4 · 100 = 0.01 rad².
        let fs = 10.0;
        let count = 1001;
        let ensemble: Vec<f64> = (0..200)
            .map(|k| {
                let s = phase_random_walk(fs, count, 1e-4, derive_seed(2024, k)).unwrap();
                s.samples()[1000]
            })
            .collect();
        let var = ensemble.iter().map(|v| v * v).sum::<f64>() / ensemble.len() as f64;
        assert!((0.008..=0.012).contains(&var), "ensemble variance {var}");
    }

    #[test]
    fn random_walk_increments_pass_ljung_box() {
        let s = phase_random_walk(100.0, 20_001, 1.0, 77).unwrap();
        let inc: Vec<f64> = s.samples().windows(2).map(|w| w[1] - w[0]).collect();
        let n = inc.len() as f64;
        let mean = inc.iter().sum::<f64>() / n;
        let var = inc.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        let h = 20;
        let q: f64 = (1..=h)
            .map(|k| {
                let c: f64 = (0..inc.len() - k).map(|i| (inc[i] - mean) * (inc[i + k] - mean)).sum();
                let rho = c / var;
                rho * rho / (n - k as f64)
            })
            .sum::<f64>()
            * n
            * (n + 2.0);
        // 95% quantile of chi-square with 20 degrees of freedom.
        assert!(q < 31.41, "Ljung-Box Q = {q}");
    }

    #[test]
    fn ou_jitter_has_requested_rms() {
        let s = phase_jitter_series(1e3, 400_000, 0.018, 1.0, 3).unwrap();
        let rms = s.rms();
        assert!((rms / 0.018 - 1.0).abs() < 0.1, "rms {rms}");
    }

    #[test]
    fn tones_above_nyquist_are_dropped() {
        let tones = vec![Tone::new(10.0, 1.0), Tone::new(600.0, 1.0)];
        let x = tone_samples(&tones, 1000.0, 10_000, 0.0, 1);
        let power = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((power - 1.0).abs() < 1e-3, "power {power}");
    }

    #[test]
    fn technical_noise_psd_shape() {
        let t = TechnicalNoise {
            corner_frequency: 10.0,
            slope_alpha: 2.0,
            level_at_corner: 4.0,
        };
        assert_eq!(t.psd(10.0), 4.0);
        assert!((t.psd(20.0) - 1.0).abs() < 1e-12);
        assert_eq!(TechnicalNoise::off().psd(1.0), 0.0);
    }
}
