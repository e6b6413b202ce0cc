//! Sampled 2π-periodic functions on the uniform grid.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CsfError, Result};
use crate::spectral;

/// Values `h(x_j)` at `x_j = 2πj/N`, `N` a power of two with `N >= 16`.
///
/// The same type carries curve heights, curvatures, coefficient fields and
/// variation fields; chart-radius checks are applied by the operations that
/// interpret a profile as a curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileJson", into = "ProfileJson")]
pub struct PeriodicProfile {
    samples: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProfileJson {
    n: usize,
    samples: Vec<f64>,
}

impl TryFrom<ProfileJson> for PeriodicProfile {
    type Error = CsfError;

    fn try_from(raw: ProfileJson) -> Result<Self> {
        if raw.n != raw.samples.len() {
            return Err(CsfError::InvalidConfig(format!(
                "profile declares n = {} but has {} samples",
                raw.n,
                raw.samples.len()
            )));
        }
        PeriodicProfile::new(raw.samples)
    }
}

impl From<PeriodicProfile> for ProfileJson {
    fn from(p: PeriodicProfile) -> Self {
        ProfileJson {
            n: p.samples.len(),
            samples: p.samples,
        }
    }
}

pub fn is_valid_grid_size(n: usize) -> bool {
    n >= 16 && n.is_power_of_two()
}

impl PeriodicProfile {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if !is_valid_grid_size(samples.len()) {
            return Err(CsfError::InvalidGrid(samples.len()));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(CsfError::NonFinite(j));
        }
        Ok(PeriodicProfile { samples })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !is_valid_grid_size(n) {
            return Err(CsfError::InvalidGrid(n));
        }
        Self::new((0..n).map(|j| f(grid_point(n, j))).collect())
    }

    /// Crate-internal constructor for values produced by grid arithmetic.
    pub(crate) fn from_vec_unchecked(samples: Vec<f64>) -> Self {
        debug_assert!(is_valid_grid_size(samples.len()));
        PeriodicProfile { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn x(&self, j: usize) -> f64 {
        grid_point(self.len(), j)
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self::from_vec_unchecked(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(CsfError::GridMismatch(self.len(), other.len()));
        }
        Ok(())
    }

    /// Spectral derivative of order `m`.
    pub fn derivative(&self, m: usize) -> Self {
        Self::from_vec_unchecked(spectral::grid(self.len()).derivative(&self.samples, m))
    }

    /// Trapezoid rule `∫_0^{2π} h dx`, spectrally accurate for smooth periodic data.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * 2.0 * PI / self.len() as f64
    }

    /// Value of the trigonometric interpolant at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let g = spectral::grid(self.len());
        g.interpolate(&g.forward(&self.samples), x)
    }

    pub(crate) fn coefficients(&self) -> Vec<Complex64> {
        spectral::grid(self.len()).forward(&self.samples)
    }

    /// Shift by half a period: `h(x + π)`.
    pub fn half_shift(&self) -> Self {
        let n = self.len();
        Self::from_vec_unchecked((0..n).map(|j| self.samples[(j + n / 2) % n]).collect())
    }

    /// Rows `x_j,h_j` with a header, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,h\n");
        for (j, v) in self.samples.iter().enumerate() {
            let _ = writeln!(out, "{},{}", crate::io::fmt_real(self.x(j)), crate::io::fmt_real(*v));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let value = line
                .split(',')
                .nth(1)
                .ok_or_else(|| CsfError::InvalidConfig(format!("csv line {} has no h column", line_no + 1)))?;
            let v: f64 = value.trim().parse().map_err(|_| {
                CsfError::InvalidConfig(format!("csv line {}: bad number {value:?}", line_no + 1))
            })?;
            samples.push(v);
        }
        Self::new(samples)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn grid_point(n: usize, j: usize) -> f64 {
    2.0 * PI * j as f64 / n as f64
}

impl Add for &PeriodicProfile {
    type Output = PeriodicProfile;

    fn add(self, rhs: Self) -> PeriodicProfile {
        self.zip_map(rhs, |a, b| a + b).expect("grid mismatch in profile addition")
    }
}

impl Sub for &PeriodicProfile {
    type Output = PeriodicProfile;

    fn sub(self, rhs: Self) -> PeriodicProfile {
        self.zip_map(rhs, |a, b| a - b).expect("grid mismatch in profile subtraction")
    }
}

impl Mul<f64> for &PeriodicProfile {
    type Output = PeriodicProfile;

    fn mul(self, rhs: f64) -> PeriodicProfile {
        self.map(|v| v * rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Const,
    Sin(u32),
    Cos(u32),
}

/// A finite trigonometric polynomial, written as `{"sin": 0.2, "cos3": 0.05}` in configs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Harmonics {
    pub terms: Vec<(Basis, f64)>,
}

impl Harmonics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sin(mut self, n: u32, amp: f64) -> Self {
        self.terms.push((Basis::Sin(n), amp));
        self
    }

    pub fn cos(mut self, n: u32, amp: f64) -> Self {
        self.terms.push((Basis::Cos(n), amp));
        self
    }

    pub fn constant(mut self, amp: f64) -> Self {
        self.terms.push((Basis::Const, amp));
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(b, a)| match b {
                Basis::Const => a,
                Basis::Sin(n) => a * (n as f64 * x).sin(),
                Basis::Cos(n) => a * (n as f64 * x).cos(),
            })
            .sum()
    }

    pub fn sample(&self, n: usize) -> Result<PeriodicProfile> {
        PeriodicProfile::from_fn(n, |x| self.eval(x))
    }

    pub fn max_harmonic(&self) -> u32 {
        self.terms
            .iter()
            .map(|(b, _)| match b {
                Basis::Const => 0,
                Basis::Sin(n) | Basis::Cos(n) => *n,
            })
            .max()
            .unwrap_or(0)
    }
}

impl FromStr for Basis {
    type Err = CsfError;

    fn from_str(key: &str) -> Result<Self> {
        let key = key.trim();
        if key == "const" || key == "c0" {
            return Ok(Basis::Const);
        }
        let (kind, digits) = if let Some(rest) = key.strip_prefix("sin") {
            (0, rest)
        } else if let Some(rest) = key.strip_prefix("cos") {
            (1, rest)
        } else {
            return Err(CsfError::InvalidConfig(format!("unknown harmonic key {key:?}")));
        };
        let n: u32 = if digits.is_empty() {
            1
        } else {
            digits
                .parse()
                .map_err(|_| CsfError::InvalidConfig(format!("bad harmonic index in {key:?}")))?
        };
        if n == 0 {
            return Err(CsfError::InvalidConfig(format!("harmonic index must be >= 1 in {key:?}")));
        }
        Ok(if kind == 0 { Basis::Sin(n) } else { Basis::Cos(n) })
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Basis::Const => write!(f, "const"),
            Basis::Sin(1) => write!(f, "sin"),
            Basis::Cos(1) => write!(f, "cos"),
            Basis::Sin(n) => write!(f, "sin{n}"),
            Basis::Cos(n) => write!(f, "cos{n}"),
        }
    }
}

impl Serialize for Harmonics {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.terms.len()))?;
        for (b, a) in &self.terms {
            map.serialize_entry(&b.to_string(), a)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Harmonics {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = std::collections::BTreeMap::<String, f64>::deserialize(d)?;
        let mut terms = Vec::with_capacity(raw.len());
        for (k, v) in raw {
            let b: Basis = k.parse().map_err(serde::de::Error::custom)?;
            terms.push((b, v));
        }
        Ok(Harmonics { terms })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(PeriodicProfile::zeros(8), Err(CsfError::InvalidGrid(8))));
        assert!(matches!(PeriodicProfile::zeros(48), Err(CsfError::InvalidGrid(48))));
        assert!(PeriodicProfile::zeros(16).is_ok());
        assert!(matches!(
            PeriodicProfile::new(vec![f64::NAN; 16]),
            Err(CsfError::NonFinite(0))
        ));
    }

    #[test]
    fn harmonic_keys_parse() {
        let h: Harmonics = serde_json::from_str(r#"{"sin": 0.2, "cos2": 0.05, "const": 0.01}"#).unwrap();
        let p = h.sample(64).unwrap();
        let x = p.x(5);
        let want = 0.2 * x.sin() + 0.05 * (2.0 * x).cos() + 0.01;
        assert!((p.samples()[5] - want).abs() < 1e-15);
        assert!(serde_json::from_str::<Harmonics>(r#"{"tan": 1.0}"#).is_err());
        assert!(serde_json::from_str::<Harmonics>(r#"{"sin0": 1.0}"#).is_err());
    }

    #[test]
    fn json_rejects_inconsistent_n() {
        assert!(PeriodicProfile::from_json(r#"{"n": 32, "samples": [0.0, 1.0]}"#).is_err());
    }

    #[test]
    fn eval_interpolates_between_nodes() {
        let p = Harmonics::new().sin(1, 0.3).cos(3, 0.1).sample(32).unwrap();
        let x = 0.123;
        assert!((p.eval(x) - (0.3 * x.sin() + 0.1 * (3.0 * x).cos())).abs() < 1e-14);
    }
}
