//! Square two-dimensional FFTs built from one-dimensional `rustfft` plans.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Unnormalised forward transform of a row-major `n × n` array.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(&*self.fwd, data);
    }

    /// Unnormalised inverse transform (`Σ X e^{+i…}`).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(&*self.inv, data);
    }

    fn apply(&self, plan: &dyn Fft<f64>, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n);
        plan.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            plan.process(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
    }
}

/// Position of wavenumber `j` in an FFT array of length `n`.
pub fn wrap(j: i64, n: usize) -> usize {
    j.rem_euclid(n as i64) as usize
}

/// Signed wavenumber stored at FFT index `i`.
pub fn unwrap(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
