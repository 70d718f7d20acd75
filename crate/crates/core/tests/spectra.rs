use opatwin_core::analyzer::{fft_spectrum, rms_average, PowerSpectrum, SpectrumConfig};
use opatwin_core::detection::{expected_psd, homodyne_measure, HomodyneDetector};
use opatwin_core::noise::{colored_noise_from_psd, derive_seed, power_law_noise, white_noise, NoiseScenario, TechnicalNoise};
use opatwin_core::physics::SqueezerModel;
use opatwin_core::TimeSeries;

fn log_log_slope(p: &PowerSpectrum, lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = p
        .frequencies
        .iter()
        .zip(&p.psd)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(f, s)| (f.log10(), s.log10()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn power_law_slopes_match_alpha() {
    for (alpha, seed) in [(1.0, 1), (2.0, 2), (0.5, 3)] {
        let x = power_law_noise(1e3, 1 << 20, alpha, 1.0, seed).unwrap();
        let p = fft_spectrum(&x, &SpectrumConfig::fft(1.0, 400.0, 2.0, 2.0, 1)).unwrap();
        let slope = log_log_slope(&p, 3.0, 300.0);
        assert!((slope + alpha).abs() < 0.15, "alpha {alpha}: slope {slope}");
    }
}

#[test]
fn white_power_law_is_flat() {
    let x = power_law_noise(1e3, 1 << 18, 0.0, 2.0, 4).unwrap();
    let p = fft_spectrum(&x, &SpectrumConfig::fft(1.0, 499.0, 5.0, 5.0, 1)).unwrap();
    for (lo, hi) in [(5.0, 20.0), (20.0, 100.0), (100.0, 480.0)] {
        let m = p.mean_psd_in(lo, hi, |_| false).unwrap();
        assert!((10.0 * (m / 2.0).log10()).abs() < 1.0, "{lo}-{hi} Hz: {m}");
    }
}

#[test]
fn colored_noise_follows_target_psd() {
    let tech = TechnicalNoise::default();
    let psd = |f: f64| 1.0 + tech.psd(f);
    let x = colored_noise_from_psd(psd, 100e3, 1 << 20, 5).unwrap();
    let p = fft_spectrum(&x, &SpectrumConfig::fft(100.0, 20e3, 50.0, 50.0, 1)).unwrap();
    for f in [300.0, 1e3, 5e3] {
        let m = p.mean_psd_in(0.9 * f, 1.1 * f, |_| false).unwrap();
        let err = 10.0 * (m / psd(f)).log10();
        assert!(err.abs() < 0.3, "{f} Hz off by {err} dB");
    }
}

#[test]
fn band_power_is_linear_in_rbw() {
    let fs = 2e3;
    let sigma = 3.0;
    let s0 = 2.0 * sigma * sigma / fs;
    let x = white_noise(fs, 1 << 20, sigma, 6).unwrap();
    for rbw in [1.0, 2.0, 5.0, 30.0] {
        let p = fft_spectrum(&x, &SpectrumConfig::fft(50.0, 900.0, rbw, rbw, 1)).unwrap();
        let mean = (0..p.len()).map(|i| p.band_power(i)).sum::<f64>() / p.len() as f64;
        assert!((mean / (s0 * rbw) - 1.0).abs() < 0.05, "rbw {rbw}: {mean}");
    }
}

#[test]
fn averaging_narrows_bin_spread() {
    let fs = 1e3;
    let cfg = SpectrumConfig::fft(10.0, 400.0, 10.0, 10.0, 1);
    // One segment per trace, so each trace is a single periodogram.
    let n = cfg.segment_length(fs);
    let traces: Vec<PowerSpectrum> = (0..400)
        .map(|i| {
            let x = white_noise(fs, n, 1.0, derive_seed(7, i)).unwrap();
            fft_spectrum(&x, &cfg).unwrap()
        })
        .collect();
    let spread = |p: &PowerSpectrum| {
        let m = p.psd.iter().sum::<f64>() / p.len() as f64;
        (p.psd.iter().map(|v| (v - m).powi(2)).sum::<f64>() / p.len() as f64).sqrt() / m
    };
    let single = spread(&traces[0]);
    let averaged = spread(&rms_average(&traces).unwrap());
    let ratio = single / averaged;
    assert!((14.0..28.0).contains(&ratio), "spread ratio {ratio}");
}

fn homodyne_psd(theta: f64, seed: u64) -> f64 {
    let fs = 20e3;
    let src = SqueezerModel::new(0.69363, 0.75557, 9.2179e7).unwrap();
    let phase = TimeSeries::constant(fs, 1 << 18, theta).unwrap();
    let x = homodyne_measure(&NoiseScenario::quiet(), &src, &HomodyneDetector::default(), &phase, fs, seed).unwrap();
    fft_spectrum(&x, &SpectrumConfig::fft(4e3, 6e3, 20.0, 20.0, 1))
        .unwrap()
        .mean_psd_in(4.5e3, 5.5e3, |_| false)
        .unwrap()
}

#[test]
fn homodyne_noise_is_even_in_lo_phase_and_follows_the_arch() {
    let src = SqueezerModel::new(0.69363, 0.75557, 9.2179e7).unwrap();
    let det = HomodyneDetector::default();
    let sc = NoiseScenario::quiet();
    for (i, theta) in [0.3, 0.8, 1.2].into_iter().enumerate() {
        let plus = homodyne_psd(theta, 10 + i as u64);
        let minus = homodyne_psd(-theta, 20 + i as u64);
        let expected = expected_psd(&sc, &src, &det, theta, 5e3);
        assert!((10.0 * (plus / minus).log10()).abs() < 0.2, "theta {theta}: {plus} vs {minus}");
        assert!((10.0 * (plus / expected).log10()).abs() < 0.2, "theta {theta}: {plus} vs {expected}");
    }
    // Noise rises monotonically from the squeezed to the anti-squeezed quadrature.
    let arch: Vec<f64> = [0.0, 0.4, 0.8, 1.2, std::f64::consts::FRAC_PI_2]
        .iter()
        .enumerate()
        .map(|(i, &t)| homodyne_psd(t, 30 + i as u64))
        .collect();
    assert!(arch.windows(2).all(|w| w[1] > w[0]), "{arch:?}");
}
