//! Independent oracles: closed forms, Taylor jets and adaptive Simpson
//! quadrature. Nothing here calls the spectral machinery of the library.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Sub};

use csf_lab::profile::{Basis, Harmonics};

/// Truncated Taylor series `c0 + c1 τ + c2 τ²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Jet2 {
    pub fn new(c0: f64, c1: f64, c2: f64) -> Self {
        Jet2 { c0, c1, c2 }
    }

    pub fn cst(c0: f64) -> Self {
        Jet2::new(c0, 0.0, 0.0)
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.c0;
        Jet2::new(r, -self.c1 * r * r, (self.c1 * self.c1 * r - self.c2) * r * r)
    }

    pub fn sqrt(self) -> Self {
        let s = self.c0.sqrt();
        let d1 = self.c1 / (2.0 * s);
        Jet2::new(s, d1, (self.c2 - d1 * d1) / (2.0 * s))
    }

    pub fn scale(self, k: f64) -> Self {
        Jet2::new(k * self.c0, k * self.c1, k * self.c2)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2::new(self.c0 + o.c0, self.c1 + o.c1, self.c2 + o.c2)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2::new(self.c0 - o.c0, self.c1 - o.c1, self.c2 - o.c2)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2::new(
            self.c0 * o.c0,
            self.c0 * o.c1 + self.c1 * o.c0,
            self.c0 * o.c2 + self.c1 * o.c1 + self.c2 * o.c0,
        )
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

/// `m`-th derivative of a trigonometric polynomial, in closed form.
pub fn deriv(h: &Harmonics, x: f64, m: u32) -> f64 {
    h.terms
        .iter()
        .map(|&(b, a)| match b {
            Basis::Const => {
                if m == 0 {
                    a
                } else {
                    0.0
                }
            }
            Basis::Sin(n) => a * (n as f64).powi(m as i32) * (n as f64 * x + m as f64 * PI / 2.0).sin(),
            Basis::Cos(n) => a * (n as f64).powi(m as i32) * (n as f64 * x + m as f64 * PI / 2.0).cos(),
        })
        .sum()
}

/// `A(u, p) = (1+u²)²/(1+u²+p²)` on jets.
pub fn a_of(u: Jet2, p: Jet2) -> Jet2 {
    let one = Jet2::cst(1.0);
    let pp = one + u * u;
    pp * pp / (pp + p * p)
}

/// `F = A(u, u_x)(u_xx + u)` on jets.
pub fn f_of(u: Jet2, p: Jet2, q: Jet2) -> Jet2 {
    a_of(u, p) * (q + u)
}

/// Geodesic curvature of `x ↦ (cos x, sin x, h)/√(1+h²)` from the embedding,
/// `κ = det(γ, γ', γ'')/|γ'|³`, with derivatives taken by Taylor jets in `x`.
pub fn embedded_curvature(h: &Harmonics, x: f64) -> f64 {
    let (g1, g2) = embedded_derivatives(h, x);
    let g0 = embed(h, x);
    let det = g0[0] * (g1[1] * g2[2] - g1[2] * g2[1]) - g0[1] * (g1[0] * g2[2] - g1[2] * g2[0])
        + g0[2] * (g1[0] * g2[1] - g1[1] * g2[0]);
    det / norm(g1).powi(3)
}

pub fn embed(h: &Harmonics, x: f64) -> [f64; 3] {
    let z = h.eval(x);
    let s = 1.0 / (1.0 + z * z).sqrt();
    [x.cos() * s, x.sin() * s, z * s]
}

/// `(γ'(x), γ''(x))` of the embedded curve.
pub fn embedded_derivatives(h: &Harmonics, x: f64) -> ([f64; 3], [f64; 3]) {
    let z = Jet2::new(h.eval(x), deriv(h, x, 1), 0.5 * deriv(h, x, 2));
    let c = Jet2::new(x.cos(), -x.sin(), -0.5 * x.cos());
    let sn = Jet2::new(x.sin(), x.cos(), -0.5 * x.sin());
    let s = (Jet2::cst(1.0) + z * z).sqrt().recip();
    let comps = [c * s, sn * s, z * s];
    let d1 = [comps[0].c1, comps[1].c1, comps[2].c1];
    let d2 = [2.0 * comps[0].c2, 2.0 * comps[1].c2, 2.0 * comps[2].c2];
    (d1, d2)
}

pub fn norm(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Adaptive Simpson on `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Periodic integrals split into pieces so Simpson sees smooth panels.
pub fn periodic_integral(f: &dyn Fn(f64) -> f64, tol: f64) -> f64 {
    (0..16)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / 16.0;
            simpson(f, a, a + 2.0 * PI / 16.0, tol / 16.0)
        })
        .sum()
}

/// `(Re, Im)` of `(1/2π)∫ f e^{−inx} dx`.
pub fn fourier_oracle(f: &dyn Fn(f64) -> f64, n: i64) -> (f64, f64) {
    let re = periodic_integral(&|x| f(x) * (n as f64 * x).cos(), 1e-13) / (2.0 * PI);
    let im = -periodic_integral(&|x| f(x) * (n as f64 * x).sin(), 1e-13) / (2.0 * PI);
    (re, im)
}

/// `∫κ ds` by Gauss–Bonnet: area below the curve minus a hemisphere,
/// `∫₀^{2π} h/√(1+h²) dx`.
pub fn cap_area_defect(h: &Harmonics) -> f64 {
    periodic_integral(&|x| {
        let z = h.eval(x);
        z / (1.0 + z * z).sqrt()
    }, 1e-13)
}

/// Length of the embedded curve.
pub fn embedded_length(h: &Harmonics) -> f64 {
    periodic_integral(&|x| norm(embedded_derivatives(h, x).0), 1e-13)
}
