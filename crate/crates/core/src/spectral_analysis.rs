//! Fourier diagnostics for variation fields: coefficients, the linear-growth
//! bound for antipodally symmetric functions with one zero per half period,
//! the truncated mode-coupling ODE, and the lower bound on the first mode.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::csf_solver::{self, FlowConfig};
use crate::error::{CsfError, Result};
use crate::profile::PeriodicProfile;
use crate::rk4;
use crate::spectral;
use crate::sphere_chart::{is_rp2_symmetric_tol, RP2_TOL};
use crate::variation_flows::{count_transverse_zeros, CoefficientFields, DEFAULT_THETA};

/// `Σ_{j≠1, |j|≤64} (|j|³+|j|²+|j|)/(1−j)⁶`, summed once and frozen.
pub const S_J64: f64 = 14.898_624_955_342_518;
pub const S_J_CUTOFF: i64 = 64;
pub const V1_SLACK: f64 = 1e-3;
/// Fourier coefficients of coefficient fields below this are treated as roundoff.
const COEFF_NOISE: f64 = 1e-14;

/// `c_n` for `n ∈ [−N/2, N/2]`; the Nyquist value is split evenly between `±N/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    coefficients: Vec<Complex64>,
    source_grid: usize,
}

impl Spectrum {
    pub fn zeros(n: usize) -> Self {
        Spectrum {
            coefficients: vec![Complex64::new(0.0, 0.0); n + 1],
            source_grid: n,
        }
    }

    pub fn source_grid(&self) -> usize {
        self.source_grid
    }

    pub fn max_index(&self) -> i64 {
        (self.source_grid / 2) as i64
    }

    /// `c_n`, zero outside the stored band.
    pub fn get(&self, n: i64) -> Complex64 {
        let half = self.max_index();
        if n.abs() > half {
            Complex64::new(0.0, 0.0)
        } else {
            self.coefficients[(n + half) as usize]
        }
    }

    pub fn set(&mut self, n: i64, c: Complex64) {
        let half = self.max_index();
        assert!(n.abs() <= half, "mode {n} outside spectrum");
        self.coefficients[(n + half) as usize] = c;
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let half = self.max_index();
        self.coefficients.iter().enumerate().map(move |(i, &c)| (i as i64 - half, c))
    }

    /// `2π Σ|c_n|²`, equal to `∫f² dx` for band-limited data.
    pub fn parseval(&self) -> f64 {
        2.0 * PI * self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn l2_distance(&self, other: &Spectrum) -> f64 {
        let half = self.max_index().max(other.max_index());
        (-half..=half)
            .map(|n| (self.get(n) - other.get(n)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Samples of `Σ c_n e^{inx}` on the source grid.
    pub fn to_profile(&self) -> Result<PeriodicProfile> {
        let n = self.source_grid;
        let g = spectral::grid(n);
        let mut slots = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in self.iter() {
            let idx = k.rem_euclid(n as i64) as usize;
            slots[idx] += c;
        }
        PeriodicProfile::new(g.inverse_real(slots))
    }
}

impl Serialize for Spectrum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.coefficients.len()))?;
        for (n, c) in self.iter() {
            seq.serialize_element(&(n, c.re, c.im))?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let triples = Vec::<(i64, f64, f64)>::deserialize(d)?;
        let half = triples.iter().map(|t| t.0.abs()).max().unwrap_or(0);
        let n = 2 * half as usize;
        if triples.len() != n + 1 || !crate::profile::is_valid_grid_size(n) {
            return Err(serde::de::Error::custom("spectrum must list every mode in [-N/2, N/2]"));
        }
        let mut sp = Spectrum::zeros(n);
        for (k, re, im) in triples {
            sp.set(k, Complex64::new(re, im));
        }
        Ok(sp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub epsilon6: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub v1_floor: f64,
}

/// `c_n = (1/2π)∫ f e^{−inx} dx` by the trapezoid rule.
pub fn fourier_coefficients(f: &PeriodicProfile) -> Spectrum {
    let n = f.len();
    let g = spectral::grid(n);
    let raw = g.forward(f.samples());
    let mut sp = Spectrum::zeros(n);
    for (idx, &c) in raw.iter().enumerate() {
        let k = g.wavenumber(idx);
        if idx == n / 2 {
            sp.set(k, c * 0.5);
            sp.set(-k, c * 0.5);
        } else {
            sp.set(k, c);
        }
    }
    sp
}

/// Antipodal symmetry plus exactly two transverse zeros on `[0, 2π)`.
pub fn check_p2_p3(f: &PeriodicProfile, theta: f64) -> bool {
    let tol = RP2_TOL * f.sup_norm().max(1.0);
    if !is_rp2_symmetric_tol(f, tol) {
        return false;
    }
    match count_transverse_zeros(f, theta) {
        Ok(zc) => zc.count == 2 && !zc.multiple_zero_flag,
        Err(_) => false,
    }
}

/// Checks `|c_{±n}| ≤ (√2/2)·n·|c₁|` for `2 ≤ n ≤ n_max`.
pub fn verify_linear_growth(f: &PeriodicProfile, n_max: usize) -> Result<(bool, f64)> {
    if n_max > f.len() / 2 {
        return Err(CsfError::OrderTooLarge { order: n_max, n: f.len() });
    }
    if !check_p2_p3(f, DEFAULT_THETA) {
        return Err(CsfError::HypothesisNotMet(
            "function must be antipodally odd with exactly one transverse zero per half period".into(),
        ));
    }
    let sp = fourier_coefficients(f);
    let c1 = sp.get(1).norm();
    if c1 <= 10.0 * f64::EPSILON {
        return Err(CsfError::HypothesisNotMet(format!("|c_1| = {c1:e} is numerically zero")));
    }
    let mut worst = 0.0f64;
    for n in 2..=n_max as i64 {
        let bound = FRAC_1_SQRT_2 * n as f64 * c1;
        let m = sp.get(n).norm().max(sp.get(-n).norm());
        worst = worst.max(m / bound);
    }
    Ok((worst <= 1.0, worst))
}

fn check_cut(n_cut: usize, n: usize) -> Result<()> {
    if n_cut > n / 4 {
        return Err(CsfError::OrderTooLarge { order: n_cut, n });
    }
    Ok(())
}

/// Mode-coupled right side for `|n| ≤ n_cut`:
/// `dv_n/dt = (1−n²)v_n + Σ_{|j|≤n_cut} (−j² a_{n−j} + ij b_{n−j} + c_{n−j}) v_j`.
pub fn truncated_ode_rhs(v: &Spectrum, a: &Spectrum, b: &Spectrum, c: &Spectrum, n_cut: usize) -> Result<Spectrum> {
    let n = v.source_grid;
    for s in [a, b, c] {
        if s.source_grid != n {
            return Err(CsfError::GridMismatch(n, s.source_grid));
        }
    }
    check_cut(n_cut, n)?;
    let mut out = Spectrum::zeros(n);
    let cut = n_cut as i64;
    for k in -cut..=cut {
        let mut acc = v.get(k) * (1.0 - (k * k) as f64);
        for j in -cut..=cut {
            let vj = v.get(j);
            if vj == Complex64::new(0.0, 0.0) {
                continue;
            }
            let d = k - j;
            let coupling = a.get(d) * (-(j * j) as f64) + b.get(d) * Complex64::new(0.0, j as f64) + c.get(d);
            acc += coupling * vj;
        }
        out.set(k, acc);
    }
    Ok(out)
}

/// Spectrum with modes beyond `n_cut` removed.
pub fn truncate(sp: &Spectrum, n_cut: usize) -> Spectrum {
    let mut out = Spectrum::zeros(sp.source_grid);
    for (k, c) in sp.iter() {
        if k.unsigned_abs() as usize <= n_cut {
            out.set(k, c);
        }
    }
    out
}

/// Integrates the truncated system to `cfg.t_end`. The base is advanced by the
/// nonlinear flow on the grid with the same RK4 stages, and its coefficient
/// spectra are re-evaluated at every stage.
pub fn solve_truncated_ode(u0: &PeriodicProfile, v0: &Spectrum, n_cut: usize, cfg: &FlowConfig) -> Result<Spectrum> {
    let n = u0.len();
    if v0.source_grid != n {
        return Err(CsfError::GridMismatch(n, v0.source_grid));
    }
    check_cut(n_cut, n)?;
    cfg.validate()?;
    let (steps, dt) = rk4::schedule(cfg.t_end, cfg.dt_for(n)?);
    let cut = n_cut as i64;
    let mut y = u0.samples().to_vec();
    for k in -cut..=cut {
        let c = v0.get(k);
        y.push(c.re);
        y.push(c.im);
    }
    let rhs = |s: &[f64], time: f64| -> Result<Vec<f64>> {
        let u = &s[..n];
        let mut out = csf_solver::rhs_samples(u, &cfg.chart, time)?;
        let cf = crate::variation_flows::linearized_coefficients(&PeriodicProfile::from_vec_unchecked(u.to_vec()));
        let (a, b, c) = (
            fourier_coefficients(&cf.a),
            fourier_coefficients(&cf.b),
            fourier_coefficients(&cf.c),
        );
        let mut v = Spectrum::zeros(n);
        for (i, k) in (-cut..=cut).enumerate() {
            v.set(k, Complex64::new(s[n + 2 * i], s[n + 2 * i + 1]));
        }
        let dv = truncated_ode_rhs(&v, &a, &b, &c, n_cut)?;
        for k in -cut..=cut {
            let d = dv.get(k);
            out.push(d.re);
            out.push(d.im);
        }
        Ok(out)
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        y = rk4::step(&y, dt, |s| rhs(s, t))?;
    }
    let mut out = Spectrum::zeros(n);
    for (i, k) in (-cut..=cut).enumerate() {
        out.set(k, Complex64::new(y[n + 2 * i], y[n + 2 * i + 1]));
    }
    Ok(out)
}

/// `Σ_{j≠1, |j|≤J} (|j|³+|j|²+|j|)/(1−j)⁶`.
pub fn coupling_sum(cutoff: i64) -> f64 {
    (-cutoff..=cutoff)
        .filter(|&j| j != 1)
        .map(|j| {
            let a = j.abs() as f64;
            (a.powi(3) + a * a + a) / ((1 - j) as f64).powi(6)
        })
        .sum()
}

pub fn constant_from_epsilon6(epsilon6: f64) -> f64 {
    epsilon6 * (3.0 + FRAC_1_SQRT_2 * S_J64)
}

/// `max_{i≤k} sup|∂^i f|` after discarding Fourier modes at roundoff level.
pub fn filtered_ck_norm(f: &PeriodicProfile, k: usize) -> Result<f64> {
    if k > f.len() / 4 {
        return Err(CsfError::OrderTooLarge { order: k, n: f.len() });
    }
    let g = spectral::grid(f.len());
    let mut coeffs = g.forward(f.samples());
    for c in coeffs.iter_mut() {
        if c.norm() < COEFF_NOISE {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    let mut best = 0.0f64;
    for m in 0..=k {
        let d = g.apply_derivative(&coeffs, m);
        best = best.max(d.iter().fold(0.0f64, |s, v| s.max(v.abs())));
    }
    Ok(best)
}

/// `max(‖a‖_{C⁶}, ‖b‖_{C⁶}, ‖c‖_{C⁶})`.
pub fn coefficient_c6(cf: &CoefficientFields) -> Result<f64> {
    Ok(filtered_ck_norm(&cf.a, 6)?
        .max(filtered_ck_norm(&cf.b, 6)?)
        .max(filtered_ck_norm(&cf.c, 6)?))
}

pub fn measure_coefficient_decay(
    coeff_log: &[(f64, CoefficientFields)],
    reference_v: Option<&PeriodicProfile>,
) -> Result<DecayCertificate> {
    if coeff_log.is_empty() {
        return Err(CsfError::EmptyLog);
    }
    let mut epsilon6 = 0.0f64;
    for (t, cf) in coeff_log {
        epsilon6 = epsilon6.max(t.exp() * coefficient_c6(cf)?);
    }
    let c = constant_from_epsilon6(epsilon6);
    let v1_floor = match reference_v {
        Some(v) => (-c).exp() * fourier_coefficients(v).get(1).norm(),
        None => 0.0,
    };
    Ok(DecayCertificate { epsilon6, c, v1_floor })
}

/// `|v₁(t)| ≥ e^{C(e^{−t}−1)}|v₁(0)|(1 − 1e−3)` at every snapshot.
pub fn v1_floor_check(v_traj: &[(f64, Spectrum)], cert: &DecayCertificate) -> Result<bool> {
    let (t0, first) = v_traj.first().ok_or(CsfError::EmptyLog)?;
    let v10 = first.get(1).norm();
    if v10 <= 10.0 * f64::EPSILON {
        return Err(CsfError::HypothesisNotMet("v_1(0) vanishes".into()));
    }
    Ok(v_traj.iter().all(|(t, sp)| {
        let s = t - t0;
        sp.get(1).norm() >= (cert.c * ((-s).exp() - 1.0)).exp() * v10 * (1.0 - V1_SLACK)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Harmonics;

    #[test]
    fn coefficient_examples() {
        let s = fourier_coefficients(&Harmonics::new().sin(1, 1.0).sample(32).unwrap());
        assert!((s.get(1) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((s.get(-1) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        assert!(s.iter().filter(|(k, _)| k.abs() != 1).all(|(_, c)| c.norm() < 1e-14));
        let c = fourier_coefficients(&Harmonics::new().cos(2, 1.0).sample(32).unwrap());
        assert!((c.get(2).re - 0.5).abs() < 1e-15 && (c.get(-2).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spectrum_json_round_trip() {
        let sp = fourier_coefficients(&Harmonics::new().sin(3, 0.2).cos(1, 0.1).sample(16).unwrap());
        let text = serde_json::to_string(&sp).unwrap();
        let back: Spectrum = serde_json::from_str(&text).unwrap();
        assert_eq!(sp, back);
        assert!(text.starts_with("[[-8,"));
    }

    #[test]
    fn p2_p3_examples() {
        let f = |h: Harmonics| h.sample(64).unwrap();
        assert!(check_p2_p3(&f(Harmonics::new().sin(1, 1.0)), DEFAULT_THETA));
        assert!(!check_p2_p3(&f(Harmonics::new().sin(3, 1.0)), DEFAULT_THETA));
        assert!(check_p2_p3(&f(Harmonics::new().sin(1, 1.0).sin(3, 0.3)), DEFAULT_THETA));
    }

    #[test]
    fn linear_growth_examples() {
        let (ok, w) = verify_linear_growth(&Harmonics::new().sin(1, 1.0).sample(64).unwrap(), 32).unwrap();
        assert!(ok && w < 1e-14);
        let (ok, w) = verify_linear_growth(&Harmonics::new().sin(1, 1.0).sin(3, 0.2).sample(64).unwrap(), 32).unwrap();
        assert!(ok);
        assert!((w - 0.1 / (FRAC_1_SQRT_2 * 3.0 * 0.5)).abs() < 1e-12);
        assert!(matches!(
            verify_linear_growth(&Harmonics::new().cos(2, 0.1).sample(64).unwrap(), 32),
            Err(CsfError::HypothesisNotMet(_))
        ));
    }

    #[test]
    fn linear_growth_bound_fails_for_a_valid_function() {
        // odd harmonics up to 9, antipodally odd, one transverse zero per half period,
        // yet |c₃| exceeds (√2/2)·3·|c₁|
        let f = PeriodicProfile::from_fn(256, |x| {
            let q = 0.623_489_8 + (2.0 * x).cos() + 0.445_041_9 * (4.0 * x).cos();
            x.sin() * (q * q + 0.001)
        })
        .unwrap();
        assert!(check_p2_p3(&f, DEFAULT_THETA));
        let (ok, worst) = verify_linear_growth(&f, 32).unwrap();
        assert!(!ok);
        assert!((worst - 1.0518).abs() < 1e-3, "{worst}");
    }

    #[test]
    fn ode_rhs_examples() {
        let n = 64;
        let zero = Spectrum::zeros(n);
        let mut e3 = Spectrum::zeros(n);
        e3.set(3, Complex64::new(1.0, 0.0));
        let d = truncated_ode_rhs(&e3, &zero, &zero, &zero, 16).unwrap();
        assert!((d.get(3).re + 8.0).abs() < 1e-15);
        assert!(d.iter().filter(|(k, _)| *k != 3).all(|(_, c)| c.norm() == 0.0));
        let mut a = Spectrum::zeros(n);
        a.set(0, Complex64::new(0.1, 0.0));
        let mut e1 = Spectrum::zeros(n);
        e1.set(1, Complex64::new(1.0, 0.0));
        let d = truncated_ode_rhs(&e1, &a, &zero, &zero, 16).unwrap();
        assert!((d.get(1).re + 0.1).abs() < 1e-15);
        assert!(truncated_ode_rhs(&e1, &a, &zero, &zero, 17).is_err());
    }

    #[test]
    fn frozen_coupling_sum() {
        assert!((coupling_sum(S_J_CUTOFF) - S_J64).abs() < 1e-12);
        let c = constant_from_epsilon6(0.01);
        assert!((c - 0.01 * (3.0 + FRAC_1_SQRT_2 * S_J64)).abs() < 1e-15);
    }

    #[test]
    fn certificate_for_flat_base() {
        let z = PeriodicProfile::zeros(64).unwrap();
        let cf = crate::variation_flows::linearized_coefficients(&z);
        let v = Harmonics::new().sin(1, 1.0).sample(64).unwrap();
        let cert = measure_coefficient_decay(&[(0.0, cf.clone()), (1.0, cf)], Some(&v)).unwrap();
        assert_eq!(cert.epsilon6, 0.0);
        assert_eq!(cert.c, 0.0);
        assert!((cert.v1_floor - 0.5).abs() < 1e-15);
        assert!(matches!(measure_coefficient_decay(&[], None), Err(CsfError::EmptyLog)));
    }

    #[test]
    fn floor_check_negative_control() {
        let cert = DecayCertificate { epsilon6: 0.0, c: 0.1, v1_floor: 0.0 };
        let traj: Vec<(f64, Spectrum)> = (0..5)
            .map(|i| {
                let mut s = Spectrum::zeros(16);
                s.set(1, Complex64::new((-(i as f64)).exp(), 0.0));
                (i as f64, s)
            })
            .collect();
        assert!(!v1_floor_check(&traj, &cert).unwrap());
        let flat: Vec<(f64, Spectrum)> = traj.iter().map(|(t, _)| (*t, traj[0].1.clone())).collect();
        assert!(v1_floor_check(&flat, &cert).unwrap());
    }
}
