//! Classical fourth-order Runge–Kutta on flat real state vectors.

use crate::error::Result;

pub fn step<F>(y: &[f64], dt: f64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let stage = |k: &[f64], c: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    let k1 = f(y)?;
    let k2 = f(&stage(&k1, 0.5 * dt))?;
    let k3 = f(&stage(&k2, 0.5 * dt))?;
    let k4 = f(&stage(&k3, dt))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Uniform substeps covering `[0, t_end]`: `(count, dt_effective)`.
pub fn schedule(t_end: f64, dt: f64) -> (usize, f64) {
    let n = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    (n, t_end / n as f64)
}
