//! Linearized flow `v_t = (1+a)v_xx + b v_x + (1+c)v` about an evolving base,
//! the second-order variation `w₂`, and transverse-zero counting.
//!
//! Writing the flow as `h_t = A(h, h_x)(h_xx + h)` with `A = (1+h²)²/(1+h²+h_x²)`,
//! the `τ`-expansion of the flow of `u + τv + τ²w₂ + …` gives
//! `w₂,t = (1+a)w₂,xx + b w₂,x + (1+c)w₂ + d₂` where
//! `V₁ = DA·(v, v_x)`, `U₂ = ½D²A[(v, v_x), (v, v_x)]` and
//! `d₂ = (u + u_xx)U₂ + (v + v_xx)V₁`.

use serde::{Deserialize, Serialize};

use crate::csf_solver::{self, FlowConfig};
use crate::error::{CsfError, Result};
use crate::profile::PeriodicProfile;
use crate::rk4;
use crate::spectral;
use crate::sphere_chart::ChartConfig;

pub const DEFAULT_THETA: f64 = 1e-3;
const BISECTION_STEPS: usize = 60;
const REFINE: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFields {
    pub a: PeriodicProfile,
    pub b: PeriodicProfile,
    pub c: PeriodicProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationState {
    pub base: PeriodicProfile,
    pub v: PeriodicProfile,
    pub w2: Option<PeriodicProfile>,
    pub d2: Option<PeriodicProfile>,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub count: usize,
    pub locations: Vec<f64>,
    /// `|v_x(root)|/sup|v_x|`
    pub margins: Vec<f64>,
    pub multiple_zero_flag: bool,
    /// Near-zero local extrema of `|v|` without a sign change.
    pub touch_points: Vec<f64>,
}

impl ZeroCount {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl VariationState {
    pub fn new(base: PeriodicProfile, v: PeriodicProfile) -> Result<Self> {
        base.same_grid(&v)?;
        Ok(VariationState {
            base,
            v,
            w2: None,
            d2: None,
            time: 0.0,
        })
    }

    pub fn with_w2(mut self, w2: PeriodicProfile) -> Result<Self> {
        self.base.same_grid(&w2)?;
        self.w2 = Some(w2);
        Ok(self)
    }
}

/// Pointwise values of `A` and its first and second partials in `(h, h_x)`.
struct AJet {
    a_u: f64,
    a_p: f64,
    a_uu: f64,
    a_up: f64,
    a_pp: f64,
}

#[inline]
fn a_jet(u: f64, p: f64) -> AJet {
    let pp = 1.0 + u * u;
    let q = pp + p * p;
    let (q2, q3) = (q * q, q * q * q);
    AJet {
        a_u: 4.0 * u * pp / q - 2.0 * u * pp * pp / q2,
        a_p: -2.0 * p * pp * pp / q2,
        a_uu: 4.0 * pp / q + 8.0 * u * u / q - 16.0 * u * u * pp / q2 - 2.0 * pp * pp / q2
            + 8.0 * u * u * pp * pp / q3,
        a_up: -8.0 * u * p * pp / q2 + 8.0 * u * p * pp * pp / q3,
        a_pp: -2.0 * pp * pp / q2 + 8.0 * p * p * pp * pp / q3,
    }
}

#[inline]
fn coeffs_at(u: f64, ux: f64, uxx: f64) -> (f64, f64, f64) {
    let p = 1.0 + u * u;
    let q = p + ux * ux;
    let a = p * p / q - 1.0;
    let b = -2.0 * ux * p * p * (u + uxx) / (q * q);
    let c = p * (1.0 + 4.0 * u * u + 3.0 * u.powi(4) + 2.0 * u * p * uxx + ux * ux * (1.0 + 5.0 * u * u + 4.0 * u * uxx))
        / (q * q)
        - 1.0;
    (a, b, c)
}

pub fn linearized_coefficients(u: &PeriodicProfile) -> CoefficientFields {
    let (ux, uxx) = spectral::grid(u.len()).d1_d2(u.samples());
    let n = u.len();
    let (mut a, mut b, mut c) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 0..n {
        let (aj, bj, cj) = coeffs_at(u.samples()[j], ux[j], uxx[j]);
        a.push(aj);
        b.push(bj);
        c.push(cj);
    }
    CoefficientFields {
        a: PeriodicProfile::from_vec_unchecked(a),
        b: PeriodicProfile::from_vec_unchecked(b),
        c: PeriodicProfile::from_vec_unchecked(c),
    }
}

/// `(U₂, V₁, d₂)` at base `u` and first variation `v`.
pub fn second_variation_sources(
    u: &PeriodicProfile,
    v: &PeriodicProfile,
) -> Result<(PeriodicProfile, PeriodicProfile, PeriodicProfile)> {
    u.same_grid(v)?;
    let (u2, v1, d2) = sources_samples(u.samples(), v.samples());
    Ok((
        PeriodicProfile::from_vec_unchecked(u2),
        PeriodicProfile::from_vec_unchecked(v1),
        PeriodicProfile::from_vec_unchecked(d2),
    ))
}

fn sources_samples(u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let g = spectral::grid(u.len());
    let (ux, uxx) = g.d1_d2(u);
    let (vx, vxx) = g.d1_d2(v);
    let n = u.len();
    let (mut u2, mut v1, mut d2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for j in 0..n {
        let jet = a_jet(u[j], ux[j]);
        let vv = v[j];
        let vp = vx[j];
        let uu2 = 0.5 * (jet.a_uu * vv * vv + 2.0 * jet.a_up * vv * vp + jet.a_pp * vp * vp);
        let vv1 = jet.a_u * vv + jet.a_p * vp;
        u2.push(uu2);
        v1.push(vv1);
        d2.push((u[j] + uxx[j]) * uu2 + (vv + vxx[j]) * vv1);
    }
    (u2, v1, d2)
}

/// `(1+a)f_xx + b f_x + (1+c)f` with coefficients from `u`.
fn linear_operator(u: &[f64], f: &[f64]) -> Vec<f64> {
    let g = spectral::grid(u.len());
    let (ux, uxx) = g.d1_d2(u);
    let (fx, fxx) = g.d1_d2(f);
    (0..u.len())
        .map(|j| {
            let (a, b, c) = coeffs_at(u[j], ux[j], uxx[j]);
            (1.0 + a) * fxx[j] + b * fx[j] + (1.0 + c) * f[j]
        })
        .collect()
}

fn check_finite(y: &[f64], time: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CsfError::Instability { time })
    }
}

/// Right side of the coupled system on the flat state `[u, v]` or `[u, v, w₂]`.
fn coupled_rhs(y: &[f64], n: usize, chart: &ChartConfig, time: f64) -> Result<Vec<f64>> {
    check_finite(y, time)?;
    let u = &y[..n];
    let v = &y[n..2 * n];
    let mut out = csf_solver::rhs_samples(u, chart, time)?;
    out.extend(linear_operator(u, v));
    if y.len() == 3 * n {
        let w = &y[2 * n..];
        let (_, _, d2) = sources_samples(u, v);
        out.extend(linear_operator(u, w).into_iter().zip(d2).map(|(l, d)| l + d));
    }
    Ok(out)
}

fn coupled_step(state: &VariationState, dt: f64, with_w2: bool, chart: &ChartConfig) -> Result<VariationState> {
    let n = state.base.len();
    state.base.same_grid(&state.v)?;
    let mut y = state.base.samples().to_vec();
    y.extend_from_slice(state.v.samples());
    if with_w2 {
        match &state.w2 {
            Some(w) => {
                state.base.same_grid(w)?;
                y.extend_from_slice(w.samples());
            }
            None => y.extend(std::iter::repeat_n(0.0, n)),
        }
    }
    let t = state.time;
    let y = rk4::step(&y, dt, |s| coupled_rhs(s, n, chart, t))?;
    check_finite(&y, t + dt)?;
    let base = PeriodicProfile::from_vec_unchecked(y[..n].to_vec());
    let v = PeriodicProfile::from_vec_unchecked(y[n..2 * n].to_vec());
    let (w2, d2) = if with_w2 {
        let w = PeriodicProfile::from_vec_unchecked(y[2 * n..].to_vec());
        let (_, _, d2) = second_variation_sources(&base, &v)?;
        (Some(w), Some(d2))
    } else {
        (state.w2.clone(), state.d2.clone())
    };
    Ok(VariationState {
        base,
        v,
        w2,
        d2,
        time: t + dt,
    })
}

/// One RK4 step of `(u, v)`. `coeffs` must belong to `state.base`; the
/// intermediate stages re-evaluate the coefficients at the stage base.
pub fn lcsf_step(state: &VariationState, coeffs: &CoefficientFields, dt: f64) -> Result<VariationState> {
    state.base.same_grid(&coeffs.a)?;
    coupled_step(state, dt, false, &ChartConfig::default())
}

/// One RK4 step of `(u, v, w₂)`; a missing `w₂` starts from zero.
pub fn w2_step(state: &VariationState, dt: f64) -> Result<VariationState> {
    coupled_step(state, dt, true, &ChartConfig::default())
}

/// Snapshots of a coupled evolution recorded like [`csf_solver::flow`].
pub fn evolve(state: &VariationState, cfg: &FlowConfig, with_w2: bool) -> Result<Vec<VariationState>> {
    cfg.validate()?;
    let (steps, dt) = rk4::schedule(cfg.t_end, cfg.dt_for(state.base.len())?);
    let mut cur = state.clone();
    if with_w2 && cur.w2.is_none() {
        cur.w2 = Some(PeriodicProfile::zeros(cur.base.len())?);
    }
    if with_w2 {
        cur.d2 = Some(second_variation_sources(&cur.base, &cur.v)?.2);
    }
    let start = cur.time;
    let mut out = vec![cur.clone()];
    for k in 1..=steps {
        cur = coupled_step(&cur, dt, with_w2, &cfg.chart)?;
        if k % cfg.record_every == 0 || k == steps {
            if k == steps {
                cur.time = start + cfg.t_end;
            }
            out.push(cur.clone());
        }
    }
    Ok(out)
}

/// Counts sign changes of the trigonometric interpolant of `v` on `[0, 2π)`.
pub fn count_transverse_zeros(v: &PeriodicProfile, theta: f64) -> Result<ZeroCount> {
    let sup = v.sup_norm();
    if sup < 10.0 * f64::EPSILON {
        return Err(CsfError::NumericallyZero(sup));
    }
    let g = spectral::grid(v.len());
    let coeffs = g.forward(v.samples());
    let m = REFINE * v.len();
    let fine = g.resample(v.samples(), m);
    let fine_dx = spectral::grid(m).derivative(&fine, 1);
    let sup_dx = fine_dx.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let sup_fine = fine.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let h = 2.0 * std::f64::consts::PI / m as f64;

    let mut locations = Vec::new();
    let mut margins = Vec::new();
    let mut touch_points = Vec::new();
    for j in 0..m {
        let (fa, fb) = (fine[j], fine[(j + 1) % m]);
        let crosses = (fa < 0.0 && fb >= 0.0) || (fa > 0.0 && fb <= 0.0);
        if crosses {
            let root = bisect(&g, &coeffs, j as f64 * h, (j + 1) as f64 * h, fa);
            let slope = g.interpolate_derivative(&coeffs, root, 1).abs();
            locations.push(root.rem_euclid(2.0 * std::f64::consts::PI));
            margins.push(if sup_dx > 0.0 { slope / sup_dx } else { 0.0 });
            continue;
        }
        // a local minimum of |v| that nearly touches zero without crossing
        let fp = fine[(j + m - 1) % m];
        let is_min = fa.abs() <= fp.abs() && fa.abs() <= fb.abs() && fa != 0.0 && fp * fa > 0.0 && fb * fa > 0.0;
        if is_min && fa.abs() < theta * sup_fine {
            touch_points.push(j as f64 * h);
        }
    }
    let multiple_zero_flag = margins.iter().any(|&mg| mg < theta) || !touch_points.is_empty();
    Ok(ZeroCount {
        count: locations.len(),
        locations,
        margins,
        multiple_zero_flag,
        touch_points,
    })
}

fn bisect(g: &spectral::SpectralGrid, coeffs: &[num_complex::Complex64], mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let lo_sign = flo > 0.0;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let fm = g.interpolate(coeffs, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Harmonics;

    #[test]
    fn coefficients_at_constant_base() {
        let k = 0.1;
        let u = PeriodicProfile::from_fn(32, |_| k).unwrap();
        let cf = linearized_coefficients(&u);
        for j in 0..32 {
            assert!((cf.a.samples()[j] - k * k).abs() < 1e-15);
            assert!(cf.b.samples()[j].abs() < 1e-15);
            assert!((cf.c.samples()[j] - 3.0 * k * k).abs() < 1e-14);
        }
        let z = linearized_coefficients(&PeriodicProfile::zeros(16).unwrap());
        assert_eq!(z.a.sup_norm() + z.b.sup_norm() + z.c.sup_norm(), 0.0);
    }

    #[test]
    fn c_equals_a_plus_au_times_curvature_term() {
        for &(u, p, s) in &[(0.1, 0.2, -0.3), (-0.3, 0.05, 0.7), (0.0, 0.4, 0.1)] {
            let jet = a_jet(u, p);
            let (_, b, c) = coeffs_at(u, p, s);
            let a_val = (1.0 + u * u).powi(2) / (1.0 + u * u + p * p);
            assert!((1.0 + c - (a_val + jet.a_u * (u + s))).abs() < 1e-14);
            assert!((b - jet.a_p * (u + s)).abs() < 1e-15);
        }
    }

    #[test]
    fn sources_at_zero_base() {
        let u = PeriodicProfile::zeros(64).unwrap();
        let v = Harmonics::new().sin(1, 1.0).sample(64).unwrap();
        let (u2, v1, d2) = second_variation_sources(&u, &v).unwrap();
        assert_eq!(v1.sup_norm(), 0.0);
        assert_eq!(d2.sup_norm(), 0.0);
        for j in 0..64 {
            let e = (u2.samples()[j] + (2.0 * u.x(j)).cos()).abs();
            assert!(e < 1e-13, "{j} {e}");
        }
    }

    #[test]
    fn zero_counts() {
        let v = Harmonics::new().sin(1, 1.0).sample(64).unwrap();
        let zc = count_transverse_zeros(&v, DEFAULT_THETA).unwrap();
        assert_eq!(zc.count, 2);
        assert!(zc.margins.iter().all(|m| (m - 1.0).abs() < 1e-12));
        assert!(!zc.multiple_zero_flag);
        let v3 = Harmonics::new().sin(3, 1.0).sample(64).unwrap();
        assert_eq!(count_transverse_zeros(&v3, DEFAULT_THETA).unwrap().count, 6);
        let p3 = Harmonics::new().sin(1, 1.0).sin(3, 0.3).sample(64).unwrap();
        assert_eq!(count_transverse_zeros(&p3, DEFAULT_THETA).unwrap().count, 2);
        let z = PeriodicProfile::zeros(64).unwrap();
        assert!(matches!(count_transverse_zeros(&z, DEFAULT_THETA), Err(CsfError::NumericallyZero(_))));
    }

    #[test]
    fn roots_are_refined() {
        let v = PeriodicProfile::from_fn(64, |x| (x - 0.3).sin()).unwrap();
        let zc = count_transverse_zeros(&v, DEFAULT_THETA).unwrap();
        let mut locs = zc.locations.clone();
        locs.sort_by(f64::total_cmp);
        assert!((locs[0] - 0.3).abs() < 1e-13);
        assert!((locs[1] - 0.3 - std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn double_zero_is_flagged() {
        // sin x cos²x has double zeros at π/2 and 3π/2
        let v = PeriodicProfile::from_fn(64, |x| x.sin() * x.cos().powi(2)).unwrap();
        let zc = count_transverse_zeros(&v, DEFAULT_THETA).unwrap();
        assert!(zc.multiple_zero_flag);
        // a tangency without sign change: 1 - cos x at x = 0
        let t = PeriodicProfile::from_fn(64, |x| 1.0 - x.cos() + 1e-6).unwrap();
        let zt = count_transverse_zeros(&t, DEFAULT_THETA).unwrap();
        assert_eq!(zt.count, 0);
        assert!(zt.multiple_zero_flag);
    }

    #[test]
    fn diagonal_modes_at_zero_base() {
        let base = PeriodicProfile::zeros(32).unwrap();
        let v = Harmonics::new().sin(2, 1.0).sample(32).unwrap();
        let mut st = VariationState::new(base.clone(), v).unwrap();
        let dt = 1e-3;
        for _ in 0..1000 {
            let cf = linearized_coefficients(&st.base);
            st = lcsf_step(&st, &cf, dt).unwrap();
        }
        for j in 0..32 {
            let want = (-3.0f64).exp() * (2.0 * base.x(j)).sin();
            assert!((st.v.samples()[j] - want).abs() < 1e-6);
        }
    }

    #[test]
    fn w2_mode_decay() {
        let base = PeriodicProfile::zeros(32).unwrap();
        let v = Harmonics::new().sin(2, 1.0).sample(32).unwrap();
        let w = Harmonics::new().sin(3, 1.0).sample(32).unwrap();
        let mut st = VariationState::new(base.clone(), v).unwrap().with_w2(w).unwrap();
        for _ in 0..500 {
            st = w2_step(&st, 1e-3).unwrap();
        }
        let w = st.w2.unwrap();
        for j in 0..32 {
            let want = (-4.0f64).exp() * (3.0 * base.x(j)).sin();
            assert!((w.samples()[j] - want).abs() < 1e-6);
        }
    }
}
