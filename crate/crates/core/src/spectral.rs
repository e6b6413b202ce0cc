//! Pseudospectral machinery on the uniform periodic grid `x_j = 2πj/N`.
//!
//! Coefficients are scaled so that `c_k = (1/N) Σ_j f_j e^{-i k x_j}`, which is the
//! trapezoid-rule value of `(1/2π)∫ f e^{-ikx} dx`. The Nyquist coefficient is
//! interpreted as `c_{N/2} cos(N x / 2)`, so odd derivatives drop it.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct SpectralGrid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Shared FFT plans for grid size `n`.
pub fn grid(n: usize) -> Arc<SpectralGrid> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SpectralGrid>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("spectral cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(SpectralGrid {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

impl SpectralGrid {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed wavenumber of FFT slot `idx`; the Nyquist slot maps to `+N/2`.
    #[inline]
    pub fn wavenumber(&self, idx: usize) -> i64 {
        if idx <= self.n / 2 {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(f.len(), self.n);
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for c in buf.iter_mut() {
            *c *= scale;
        }
        buf
    }

    /// Inverse of [`forward`](Self::forward), keeping the real part.
    pub fn inverse_real(&self, mut coeffs: Vec<Complex64>) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.n);
        self.inverse.process(&mut coeffs);
        coeffs.into_iter().map(|c| c.re).collect()
    }

    /// Multiplier `(ik)^m` for slot `idx`, with the Nyquist convention applied.
    fn multiplier(&self, idx: usize, m: usize) -> Complex64 {
        let k = self.wavenumber(idx);
        if m == 0 {
            return Complex64::new(1.0, 0.0);
        }
        if idx == self.n / 2 && m % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, k as f64).powu(m as u32)
    }

    pub fn apply_derivative(&self, coeffs: &[Complex64], m: usize) -> Vec<f64> {
        let d: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| c * self.multiplier(idx, m))
            .collect();
        self.inverse_real(d)
    }

    pub fn derivative(&self, f: &[f64], m: usize) -> Vec<f64> {
        if m == 0 {
            return f.to_vec();
        }
        let c = self.forward(f);
        self.apply_derivative(&c, m)
    }

    /// First and second derivatives from one forward transform.
    pub fn d1_d2(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = self.forward(f);
        (self.apply_derivative(&c, 1), self.apply_derivative(&c, 2))
    }

    /// Derivatives of orders `0..=kmax`.
    pub fn derivatives_upto(&self, f: &[f64], kmax: usize) -> Vec<Vec<f64>> {
        let c = self.forward(f);
        (0..=kmax)
            .map(|m| {
                if m == 0 {
                    f.to_vec()
                } else {
                    self.apply_derivative(&c, m)
                }
            })
            .collect()
    }

    /// Periodic antiderivative `F` with `F(0) = 0` and `F' = f`. The mean of `f`
    /// contributes the secular term `c_0 x`.
    pub fn antiderivative(&self, f: &[f64]) -> Vec<f64> {
        let c = self.forward(f);
        let mean = c[0].re;
        let integ: Vec<Complex64> = c
            .iter()
            .enumerate()
            .map(|(idx, &ck)| {
                let k = self.wavenumber(idx);
                if k == 0 || idx == self.n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    ck / Complex64::new(0.0, k as f64)
                }
            })
            .collect();
        let periodic = self.inverse_real(integ);
        let p0 = periodic[0];
        periodic
            .iter()
            .enumerate()
            .map(|(j, &p)| mean * self.x(j) + p - p0)
            .collect()
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }

    /// Value of the trigonometric interpolant at arbitrary `x`.
    pub fn interpolate(&self, coeffs: &[Complex64], x: f64) -> f64 {
        self.interpolate_derivative(coeffs, x, 0)
    }

    /// `m`-th derivative of the trigonometric interpolant at `x`.
    pub fn interpolate_derivative(&self, coeffs: &[Complex64], x: f64, m: usize) -> f64 {
        let half = self.n / 2;
        // real form: c_0 + Σ_{k=1}^{N/2-1} 2 Re(c_k e^{ikx}) + c_{N/2} cos(N x/2)
        let mut acc = 0.0;
        let step = Complex64::from_polar(1.0, x);
        let mut phase = Complex64::new(1.0, 0.0);
        for (k, c) in coeffs.iter().enumerate().take(half + 1) {
            let mut term = *c * phase * self.multiplier(k, m);
            if k == half {
                // cos(N x / 2) = Re(e^{i N x/2}); the multiplier already handles parity
                acc += term.re;
            } else if k == 0 {
                acc += term.re;
            } else {
                term *= 2.0;
                acc += term.re;
            }
            phase *= step;
        }
        acc
    }

    /// Band-limited resampling onto `m >= n` uniform points.
    pub fn resample(&self, f: &[f64], m: usize) -> Vec<f64> {
        assert!(m >= self.n && m.is_multiple_of(self.n));
        let c = self.forward(f);
        let fine = grid(m);
        let mut padded = vec![Complex64::new(0.0, 0.0); m];
        let half = self.n / 2;
        for (idx, &ck) in c.iter().enumerate() {
            let k = self.wavenumber(idx);
            if idx == half {
                padded[half] = ck * 0.5;
                padded[m - half] = ck * 0.5;
            } else if k >= 0 {
                padded[k as usize] = ck;
            } else {
                padded[(m as i64 + k) as usize] = ck;
            }
        }
        // inverse of the coefficient scaling convention: f_j = Σ c_k e^{ikx_j}
        fine.inverse_real(padded)
    }
}
