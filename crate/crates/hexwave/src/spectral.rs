//! Thin 2D FFT wrapper and wavenumber layouts shared by the grid solvers.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

/// In-place 2D transform on row-major data `a[i0 * n1 + i1]`.
///
/// The inverse is normalized by `1/(n0 n1)`.
#[derive(Clone)]
pub struct Fft2 {
    n0: usize,
    n1: usize,
    fwd0: Arc<dyn Fft<f64>>,
    inv0: Arc<dyn Fft<f64>>,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n0", &self.n0).field("n1", &self.n1).finish()
    }
}

impl Fft2 {
    pub fn new(n0: usize, n1: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n0,
            n1,
            fwd0: planner.plan_fft_forward(n0),
            inv0: planner.plan_fft_inverse(n0),
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n0, self.n1)
    }

    pub fn len(&self) -> usize {
        self.n0 * self.n1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, a: &mut [C64]) {
        self.run(a, &self.fwd0, &self.fwd1);
    }

    pub fn inverse(&self, a: &mut [C64]) {
        self.run(a, &self.inv0, &self.inv1);
        let s = 1.0 / (self.n0 * self.n1) as f64;
        for v in a.iter_mut() {
            *v *= s;
        }
    }

    fn run(&self, a: &mut [C64], f0: &Arc<dyn Fft<f64>>, f1: &Arc<dyn Fft<f64>>) {
        assert_eq!(a.len(), self.n0 * self.n1);
        if self.n1 > 1 {
            f1.process(a);
        }
        if self.n0 > 1 {
            let mut t = vec![C64::new(0.0, 0.0); a.len()];
            transpose(a, &mut t, self.n0, self.n1);
            f0.process(&mut t);
            transpose(&t, a, self.n1, self.n0);
        }
    }
}

/// `dst[j * rows + i] = src[i * cols + j]`, blocked for cache reuse.
pub fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const B: usize = 32;
    for ib in (0..rows).step_by(B) {
        for jb in (0..cols).step_by(B) {
            for i in ib..(ib + B).min(rows) {
                for j in jb..(jb + B).min(cols) {
                    dst[j * rows + i] = src[i * cols + j];
                }
            }
        }
    }
}

/// Angular wavenumbers of a length-`n` periodic grid of period `length`, in
/// the standard FFT order. The Nyquist entry is kept as `-n/2`.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let s = 2.0 * PI / length;
    (0..n)
        .map(|j| {
            let j = j as i64;
            let n = n as i64;
            let m = if j < (n + 1) / 2 { j } else { j - n };
            m as f64 * s
        })
        .collect()
}

/// Wavenumbers for first derivatives: the Nyquist mode of an even grid is
/// zeroed so real data stays real.
pub fn derivative_wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let mut k = wavenumbers(n, length);
    if n % 2 == 0 && n > 0 {
        k[n / 2] = 0.0;
    }
    k
}

/// Signed integer frequency for FFT bin `j` of `n`.
pub fn signed_bin(j: usize, n: usize) -> i64 {
    let (j, n) = (j as i64, n as i64);
    if j < (n + 1) / 2 {
        j
    } else {
        j - n
    }
}
