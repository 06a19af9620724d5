//! Thin wrappers over rustfft with a per-thread plan cache.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In place `X_k = sum_j x_j e(-jk/n)`.
pub fn forward(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// In place `x_j = sum_k X_k e(jk/n)`, unnormalized.
pub fn inverse(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::e;

    #[test]
    fn forward_matches_direct_sum() {
        let n = 12;
        let x: Vec<Complex64> = (0..n).map(|j| Complex64::new(j as f64, (j * j) as f64 * 0.1)).collect();
        let mut y = x.clone();
        forward(&mut y);
        for (k, yk) in y.iter().enumerate() {
            let d: Complex64 = (0..n).map(|j| x[j] * e(-((j * k) as f64) / n as f64)).sum();
            assert!((d - yk).norm() < 1e-9);
        }
        inverse(&mut y);
        for j in 0..n {
            assert!((y[j] / n as f64 - x[j]).norm() < 1e-12);
        }
    }
}
