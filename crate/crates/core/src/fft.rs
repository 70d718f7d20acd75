use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT, unnormalized.
pub(crate) fn forward(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// In-place inverse DFT, unnormalized (no 1/N).
pub(crate) fn inverse(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}

/// Frequency of DFT bin `k` for an `n`-point transform, folded to `[-fs/2, fs/2)`.
pub(crate) fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    if k <= n / 2 {
        k as f64 * sample_rate / n as f64
    } else {
        -((n - k) as f64) * sample_rate / n as f64
    }
}
