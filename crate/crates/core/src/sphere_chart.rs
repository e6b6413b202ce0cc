//! Geometry of graph curves `z = h(x)` in the equator chart of the unit sphere.
//!
//! The unit normal `N` of a graph curve is tangent to the sphere and points
//! toward increasing `z`; on the equator it is `(0, 0, 1)`. Curvature, the
//! rotation fields and the bisection defect all use that orientation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CsfError, Result};
use crate::profile::PeriodicProfile;
use crate::spectral;

/// Default C¹ closeness under which the Poincaré-type ratio is checked.
pub const POINCARE_DELTA0: f64 = 0.01;
pub const POINCARE_BOUND: f64 = 0.4;
/// Bisection defect accepted by [`poincare_ratio`].
pub const BISECTION_TOL: f64 = 1e-6;
pub const RP2_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChartConfig {
    pub chart_radius: f64,
    pub grid_size: usize,
    pub quadrature_tolerance: f64,
}

impl Default for ChartConfig {
    fn default() -> Self {
        ChartConfig {
            chart_radius: 0.5,
            grid_size: 256,
            quadrature_tolerance: 1e-8,
        }
    }
}

impl ChartConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.chart_radius > 0.0 && self.chart_radius < 1.0) {
            return Err(CsfError::InvalidConfig(format!(
                "chart_radius must lie in (0, 1), got {}",
                self.chart_radius
            )));
        }
        if !crate::profile::is_valid_grid_size(self.grid_size) {
            return Err(CsfError::InvalidGrid(self.grid_size));
        }
        if !(self.quadrature_tolerance > 0.0) {
            return Err(CsfError::InvalidConfig("quadrature_tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Largest admissible `sup|h|`.
    pub fn breach_limit(&self) -> f64 {
        0.8 * self.chart_radius
    }

    pub fn check(&self, h: &PeriodicProfile, time: f64) -> Result<()> {
        let sup = h.sup_norm();
        if sup > self.breach_limit() {
            return Err(CsfError::ChartBreach {
                time,
                sup,
                limit: self.breach_limit(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreatCircleFit {
    pub a: f64,
    pub b: f64,
    pub residual_sup: f64,
}

impl GreatCircleFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a * x.sin() + self.b * x.cos()
    }

    pub fn sample(&self, n: usize) -> Result<PeriodicProfile> {
        PeriodicProfile::from_fn(n, |x| self.eval(x))
    }
}

pub fn chart_embed(x: f64, z: f64) -> Result<[f64; 3]> {
    if !(z.abs() < 1.0) {
        return Err(CsfError::ChartDomain(z));
    }
    Ok(embed_unchecked(x, z))
}

#[inline]
fn embed_unchecked(x: f64, z: f64) -> [f64; 3] {
    let s = 1.0 / (1.0 + z * z).sqrt();
    [x.cos() * s, x.sin() * s, z * s]
}

/// Pointwise geometric data of a graph curve.
pub(crate) struct Geometry {
    pub h: Vec<f64>,
    pub hx: Vec<f64>,
    /// `|∂_x 𝐱| = √(1+h²+h_x²)/(1+h²)`
    pub nu: Vec<f64>,
    pub kappa: Vec<f64>,
}

pub(crate) fn geometry(h: &PeriodicProfile) -> Geometry {
    let g = spectral::grid(h.len());
    let (hx, hxx) = g.d1_d2(h.samples());
    let hs = h.samples().to_vec();
    let mut nu = Vec::with_capacity(hs.len());
    let mut kappa = Vec::with_capacity(hs.len());
    for j in 0..hs.len() {
        let p = 1.0 + hs[j] * hs[j];
        let q = p + hx[j] * hx[j];
        nu.push(q.sqrt() / p);
        kappa.push((hxx[j] + hs[j]) * (p / q).powf(1.5));
    }
    Geometry { h: hs, hx, nu, kappa }
}

/// Geodesic curvature `κ = (h_xx + h)(1+h²)^{3/2}/(1+h²+h_x²)^{3/2}`.
///
/// Equivalently `(h_xx + h)/((1+h²)^{3/2} ν³)`; a latitude circle `h ≡ c` has `κ = c`.
pub fn curvature_of_profile(h: &PeriodicProfile) -> PeriodicProfile {
    PeriodicProfile::from_vec_unchecked(geometry(h).kappa)
}

/// Arclength weights `ν_j·2π/N` and total length.
pub fn arclength_and_length(h: &PeriodicProfile) -> (Vec<f64>, f64) {
    let dx = 2.0 * PI / h.len() as f64;
    let ds: Vec<f64> = geometry(h).nu.into_iter().map(|v| v * dx).collect();
    let l = ds.iter().sum();
    (ds, l)
}

/// Arclength `s(x_j)` measured from `x = 0`.
pub fn arclength_positions(h: &PeriodicProfile) -> Vec<f64> {
    spectral::grid(h.len()).antiderivative(&geometry(h).nu)
}

/// `∫κ ds`, which vanishes exactly for area-bisecting curves.
pub fn bisection_defect(h: &PeriodicProfile) -> f64 {
    let g = geometry(h);
    let dx = 2.0 * PI / h.len() as f64;
    g.kappa.iter().zip(&g.nu).map(|(k, n)| k * n).sum::<f64>() * dx
}

fn check_order(k: usize, n: usize, max: usize) -> Result<()> {
    if k > max {
        return Err(CsfError::OrderTooLarge { order: k, n });
    }
    Ok(())
}

pub fn ck_norm(h: &PeriodicProfile, k: usize) -> Result<f64> {
    check_order(k, h.len(), h.len() / 4)?;
    let ders = spectral::grid(h.len()).derivatives_upto(h.samples(), k);
    Ok(ders
        .iter()
        .map(|d| d.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max))
}

pub fn ck_distance(h1: &PeriodicProfile, h2: &PeriodicProfile, k: usize) -> Result<f64> {
    ck_norm(&h1.zip_map(h2, |a, b| a - b)?, k)
}

/// Least-squares projection onto `span{sin x, cos x}`.
pub fn fit_great_circle(h: &PeriodicProfile) -> GreatCircleFit {
    let c = h.coefficients();
    let a = -2.0 * c[1].im;
    let b = 2.0 * c[1].re;
    let residual_sup = (0..h.len())
        .map(|j| {
            let x = h.x(j);
            (h.samples()[j] - a * x.sin() - b * x.cos()).abs()
        })
        .fold(0.0, f64::max);
    GreatCircleFit { a, b, residual_sup }
}

fn cross(p: [f64; 3], q: [f64; 3]) -> [f64; 3] {
    [
        p[1] * q[2] - p[2] * q[1],
        p[2] * q[0] - p[0] * q[2],
        p[0] * q[1] - p[1] * q[0],
    ]
}

fn dot(p: [f64; 3], q: [f64; 3]) -> f64 {
    p[0] * q[0] + p[1] * q[1] + p[2] * q[2]
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let n = dot(p, p).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Unit normals `N = p × T` along the embedded curve.
pub(crate) fn curve_normals(h: &PeriodicProfile) -> Vec<[f64; 3]> {
    let g = geometry(h);
    (0..h.len())
        .map(|j| {
            let x = h.x(j);
            let (z, zx) = (g.h[j], g.hx[j]);
            let s = 1.0 / (1.0 + z * z).sqrt();
            let p = [x.cos() * s, x.sin() * s, z * s];
            // d/dx of (cos x, sin x, z)/√(1+z²)
            let ds = -z * zx * s * s * s;
            let t = [
                -x.sin() * s + x.cos() * ds,
                x.cos() * s + x.sin() * ds,
                zx * s + z * ds,
            ];
            normalize(cross(p, normalize(t)))
        })
        .collect()
}

/// Normal components of the infinitesimal rotations about two orthogonal axes
/// lying in the plane of the fitted great circle.
///
/// The first axis `e₁` is the point of the fitted circle above `x = 0` and
/// `e₂ = n_g × e₁` with `n_g` the circle's upward unit normal. Then
/// `u = ⟨e₁ × p, N⟩` and `w = ⟨p × e₂, N⟩`; on the equator these are
/// `sin x` and `cos x`. Since rotations preserve length, `∫κu ds = ∫κw ds = 0`
/// for every closed curve.
pub fn rotation_test_functions(h: &PeriodicProfile) -> (PeriodicProfile, PeriodicProfile) {
    let fit = fit_great_circle(h);
    let (e1, e2) = great_circle_frame(&fit);
    let normals = curve_normals(h);
    let mut u = Vec::with_capacity(h.len());
    let mut w = Vec::with_capacity(h.len());
    for (j, n) in normals.iter().enumerate() {
        let p = embed_unchecked(h.x(j), h.samples()[j]);
        u.push(dot(cross(e1, p), *n));
        w.push(dot(cross(p, e2), *n));
    }
    (
        PeriodicProfile::from_vec_unchecked(u),
        PeriodicProfile::from_vec_unchecked(w),
    )
}

fn great_circle_frame(fit: &GreatCircleFit) -> ([f64; 3], [f64; 3]) {
    // the circle lies in the plane z = a y + b x
    let ng = normalize([-fit.b, -fit.a, 1.0]);
    let e1 = normalize([1.0, 0.0, fit.b]);
    (e1, cross(ng, e1))
}

/// `(∫κ² ds)/(∫(κ_s)² ds)` for an area-bisecting curve.
pub fn poincare_ratio(h: &PeriodicProfile) -> Result<f64> {
    let defect = bisection_defect(h);
    if defect.abs() > BISECTION_TOL {
        return Err(CsfError::NotAreaBisecting(defect));
    }
    let k0 = curvature_energy_raw(h, 0);
    let k1 = curvature_energy_raw(h, 1);
    if k1 <= 10.0 * f64::EPSILON {
        return Err(CsfError::UndefinedRatio(k1));
    }
    Ok(k0 / k1)
}

/// `∫(∂_s^n κ)² ds` with `∂_s = ν⁻¹∂_x`.
pub(crate) fn curvature_energy_raw(h: &PeriodicProfile, n: usize) -> f64 {
    let g = geometry(h);
    let grid = spectral::grid(h.len());
    let mut k = g.kappa;
    for _ in 0..n {
        k = grid.derivative(&k, 1).iter().zip(&g.nu).map(|(d, nu)| d / nu).collect();
    }
    let dx = 2.0 * PI / h.len() as f64;
    k.iter().zip(&g.nu).map(|(v, nu)| v * v * nu).sum::<f64>() * dx
}

pub fn is_rp2_symmetric(h: &PeriodicProfile) -> bool {
    is_rp2_symmetric_tol(h, RP2_TOL)
}

pub fn is_rp2_symmetric_tol(h: &PeriodicProfile, tol: f64) -> bool {
    let n = h.len();
    let s = h.samples();
    (0..n / 2).all(|j| (s[j] + s[j + n / 2]).abs() <= tol)
}

/// Adds the constant that makes `h + c` area-bisecting (secant iteration on `c`).
pub fn bisecting_shift(h: &PeriodicProfile) -> Result<PeriodicProfile> {
    let f = |c: f64| bisection_defect(&h.map(|v| v + c));
    let (mut c0, mut f0) = (0.0, f(0.0));
    // d/dc ∫κ ds ≈ 2π near the equator
    let mut c1 = -f0 / (2.0 * PI);
    let mut f1 = f(c1);
    for _ in 0..50 {
        if f1.abs() < 1e-15 || f1 == f0 {
            break;
        }
        let c2 = c1 - f1 * (c1 - c0) / (f1 - f0);
        (c0, f0) = (c1, f1);
        c1 = c2;
        f1 = f(c1);
    }
    if f1.abs() > 1e-12 {
        return Err(CsfError::Unconverged(f1));
    }
    PeriodicProfile::new(h.samples().iter().map(|v| v + c1).collect())
}
