//! Explicit time stepping of `h_t = (1+h²)²/(1+h²+h_x²)·(h_xx + h)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CsfError, Result};
use crate::profile::PeriodicProfile;
use crate::rk4;
use crate::spectral;
use crate::sphere_chart::{
    arclength_and_length, bisection_defect, curvature_energy_raw, curvature_of_profile, fit_great_circle,
    ChartConfig, GreatCircleFit,
};

/// `dt = DEFAULT_DT_FACTOR·(2π/N)²` unless set explicitly.
pub const DEFAULT_DT_FACTOR: f64 = 0.25;
/// `sup|h_xx|` beyond which a step is treated as numerically unstable.
const BLOWUP_HXX: f64 = 1e4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// `None` picks `DEFAULT_DT_FACTOR·(2π/N)²` for the profile's grid.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub record_every: usize,
    pub stability_cap: f64,
    pub chart: ChartConfig,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: None,
            t_end: 5.0,
            record_every: 100,
            stability_cap: 0.28,
            chart: ChartConfig::default(),
        }
    }
}

impl FlowConfig {
    pub fn with_t_end(t_end: f64) -> Self {
        FlowConfig {
            t_end,
            ..Default::default()
        }
    }

    /// Nominal time step for grid size `n`, validated against the stability cap.
    pub fn dt_for(&self, n: usize) -> Result<f64> {
        let h2 = (2.0 * PI / n as f64).powi(2);
        let dt = self.dt.unwrap_or(DEFAULT_DT_FACTOR * h2);
        if !(dt > 0.0) || dt > self.stability_cap * h2 * (1.0 + 1e-12) {
            return Err(CsfError::InvalidConfig(format!(
                "dt = {dt:e} outside (0, {:e}] for N = {n}",
                self.stability_cap * h2
            )));
        }
        Ok(dt)
    }

    pub fn validate(&self) -> Result<()> {
        self.chart.validate()?;
        if !(self.t_end > 0.0) {
            return Err(CsfError::InvalidConfig("t_end must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(CsfError::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub profiles: Vec<PeriodicProfile>,
    pub kappa_sup: Vec<f64>,
    pub defects: Vec<f64>,
    pub lengths: Vec<f64>,
}

impl FlowTrajectory {
    fn push(&mut self, t: f64, h: PeriodicProfile) {
        self.kappa_sup.push(curvature_of_profile(&h).sup_norm());
        self.defects.push(bisection_defect(&h));
        self.lengths.push(arclength_and_length(&h).1);
        self.times.push(t);
        self.profiles.push(h);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &PeriodicProfile {
        self.profiles.last().expect("trajectory has at least the initial snapshot")
    }

    pub fn fits(&self) -> Vec<GreatCircleFit> {
        self.profiles.iter().map(fit_great_circle).collect()
    }

    /// True when lengths never increase by more than `tol` between snapshots.
    pub fn lengths_nonincreasing(&self, tol: f64) -> bool {
        self.lengths.windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// Snapshot times whose length leaves `[2π, 3π]` (flagged, not enforced).
    pub fn length_band_violations(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.lengths)
            .filter(|(_, &l)| !(2.0 * PI - 1e-9..=3.0 * PI).contains(&l))
            .map(|(&t, _)| t)
            .collect()
    }

    /// Total variation of the fitted `(a, b)` over snapshots with `t` in `[lo, hi]`.
    pub fn fit_variation(&self, lo: f64, hi: f64) -> f64 {
        let fits: Vec<GreatCircleFit> = self
            .times
            .iter()
            .zip(&self.profiles)
            .filter(|(&t, _)| t >= lo - 1e-12 && t <= hi + 1e-12)
            .map(|(_, p)| fit_great_circle(p))
            .collect();
        fits.windows(2)
            .map(|w| (w[1].a - w[0].a).abs() + (w[1].b - w[0].b).abs())
            .sum()
    }
}

pub(crate) fn rhs_samples(h: &[f64], chart: &ChartConfig, time: f64) -> Result<Vec<f64>> {
    let n = h.len();
    let mut sup = 0.0f64;
    for &v in h {
        if !v.is_finite() {
            return Err(CsfError::Instability { time });
        }
        sup = sup.max(v.abs());
    }
    if sup > chart.breach_limit() {
        return Err(CsfError::ChartBreach {
            time,
            sup,
            limit: chart.breach_limit(),
        });
    }
    let (hx, hxx) = spectral::grid(n).d1_d2(h);
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        if hxx[j].abs() > BLOWUP_HXX {
            return Err(CsfError::Instability { time });
        }
        let p = 1.0 + h[j] * h[j];
        out.push(p * p / (p + hx[j] * hx[j]) * (hxx[j] + h[j]));
    }
    Ok(out)
}

pub fn csf_rhs(h: &PeriodicProfile, chart: &ChartConfig) -> Result<PeriodicProfile> {
    Ok(PeriodicProfile::from_vec_unchecked(rhs_samples(h.samples(), chart, 0.0)?))
}

/// RK4 integration to `cfg.t_end`, recording `t = 0`, every `record_every`
/// steps, and the final time.
pub fn flow(h0: &PeriodicProfile, cfg: &FlowConfig) -> Result<FlowTrajectory> {
    cfg.validate()?;
    let (steps, dt) = rk4::schedule(cfg.t_end, cfg.dt_for(h0.len())?);
    cfg.chart.check(h0, 0.0)?;
    let mut traj = FlowTrajectory {
        times: vec![],
        profiles: vec![],
        kappa_sup: vec![],
        defects: vec![],
        lengths: vec![],
    };
    traj.push(0.0, h0.clone());
    let mut y = h0.samples().to_vec();
    for k in 1..=steps {
        let t = (k - 1) as f64 * dt;
        y = rk4::step(&y, dt, |s| rhs_samples(s, &cfg.chart, t))?;
        if k % cfg.record_every == 0 || k == steps {
            let t_now = if k == steps { cfg.t_end } else { k as f64 * dt };
            let h = PeriodicProfile::new(y.clone()).map_err(|_| CsfError::Instability { time: t_now })?;
            cfg.chart.check(&h, t_now)?;
            traj.push(t_now, h);
        }
    }
    Ok(traj)
}

/// `∫(∂_s^n κ)² ds`.
pub fn curvature_energy(h: &PeriodicProfile, n: usize) -> Result<f64> {
    if n > h.len() / 8 {
        return Err(CsfError::OrderTooLarge { order: n, n: h.len() });
    }
    Ok(curvature_energy_raw(h, n))
}

/// `sup|κ|` below which a log-linear fit is meaningless.
pub const KAPPA_FLOOR: f64 = 1e-12;

/// Least-squares fit `log sup|κ| ≈ log K − rate·t` over snapshots in the window.
pub fn decay_report(traj: &FlowTrajectory, window: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = window;
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.kappa_sup)
        .filter(|(&t, _)| t >= lo - 1e-12 && t <= hi + 1e-12)
        .map(|(&t, &k)| (t, k))
        .collect();
    if pts.len() < 2 {
        return Err(CsfError::EmptyWindow { lo, hi, count: pts.len() });
    }
    if let Some(&(_, k)) = pts.iter().find(|(_, k)| *k <= KAPPA_FLOOR) {
        return Err(CsfError::NumericallyZero(k));
    }
    let (slope, intercept) = linear_fit(pts.iter().map(|&(t, k)| (t, k.ln())));
    Ok((-slope, intercept.exp()))
}

pub(crate) fn linear_fit(pts: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = pts.collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
