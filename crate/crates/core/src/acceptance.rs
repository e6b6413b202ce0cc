//! The thirteen end-to-end acceptance checks, runnable individually.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::csf_solver::{decay_report, flow, FlowConfig, FlowTrajectory};
use crate::error::{CsfError, Result};
use crate::family::{
    build_reparametrization, flow_family, homotopy_distance_curve, intersection_report, make_family, spp_local_check,
    DistanceCurve, FamilyGrid, FamilySpec, Reparametrization,
};
use crate::profile::{Harmonics, PeriodicProfile};
use crate::spectral_analysis::{
    check_p2_p3, fourier_coefficients, measure_coefficient_decay, solve_truncated_ode, truncate, v1_floor_check,
    verify_linear_growth,
};
use crate::sphere_chart::{
    arclength_and_length, arclength_positions, bisecting_shift, ck_distance, ck_norm,
    curvature_of_profile, fit_great_circle, poincare_ratio, rotation_test_functions, ChartConfig, POINCARE_BOUND,
    POINCARE_DELTA0,
};
use crate::variation_flows::{count_transverse_zeros, evolve, linearized_coefficients, VariationState, DEFAULT_THETA};

pub const DEFAULT_SEED: u64 = 20_240_611;
pub const N: usize = 256;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub const NAMES: [&str; 13] = [
    "great-circle stationarity",
    "area-bisection conservation",
    "exponential curvature decay",
    "fixed-limit convergence",
    "poincare-type inequality",
    "rotation test functions",
    "zero-count monotonicity",
    "nonvanishing first mode",
    "linear growth of coefficients",
    "ode/pde equivalence",
    "family intersection persistence",
    "homotopy reparametrization",
    "variation oracle consistency",
];

type Check = fn(u64) -> Result<(bool, String)>;

const CHECKS: [Check; 13] = [
    ac01_stationarity,
    ac02_bisection,
    ac03_decay,
    ac04_fixed_limit,
    ac05_poincare,
    ac06_rotation_fields,
    ac07_zero_monotonicity,
    ac08_v1_floor,
    ac09_linear_growth,
    ac10_ode_pde,
    ac11_family,
    ac12_reparametrization,
    ac13_oracles,
];

pub fn run(id: usize, seed: u64) -> CriterionResult {
    assert!((1..=13).contains(&id), "criterion {id} does not exist");
    let start = Instant::now();
    let (passed, detail) = match CHECKS[id - 1](seed) {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name: NAMES[id - 1],
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    (1..=13).map(|id| run(id, seed)).collect()
}

fn sample(h: Harmonics) -> Result<PeriodicProfile> {
    h.sample(N)
}

fn ac01_stationarity(_: u64) -> Result<(bool, String)> {
    let h0 = sample(Harmonics::new().sin(1, 0.2).cos(1, 0.1))?;
    let traj = flow(&h0, &FlowConfig::with_t_end(5.0))?;
    let drift = (traj.last() - &h0).sup_norm();
    Ok((drift <= 1e-6, format!("drift {drift:.3e} (limit 1e-6)")))
}

/// Antipodally odd initial curves with `‖h0‖_{C⁴} ≤ 0.2`.
pub fn bisection_profiles() -> Result<Vec<PeriodicProfile>> {
    [
        Harmonics::new().sin(1, 0.1).sin(3, 0.0008).cos(5, 0.00005),
        Harmonics::new().sin(1, 0.12).cos(1, -0.06).sin(3, 0.0005).cos(3, 0.0004),
        Harmonics::new().cos(1, 0.12).sin(5, 0.00005).cos(7, 0.00001),
    ]
    .into_iter()
    .map(sample)
    .collect()
}

fn ac02_bisection(_: u64) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut c4max = 0.0f64;
    for h0 in bisection_profiles()? {
        c4max = c4max.max(ck_norm(&h0, 4)?);
        let traj = flow(&h0, &FlowConfig::with_t_end(10.0))?;
        worst = traj.defects.iter().fold(worst, |m, d| m.max(d.abs()));
    }
    Ok((
        worst <= 1e-7 && c4max <= 0.2,
        format!("max |defect| {worst:.3e} (limit 1e-7), max C4 norm {c4max:.3}"),
    ))
}

fn ac03_decay(_: u64) -> Result<(bool, String)> {
    let h0 = sample(Harmonics::new().cos(2, 0.05))?;
    let traj = flow(&h0, &FlowConfig::with_t_end(5.0))?;
    let k0 = traj.kappa_sup[0];
    let bound_ok = traj
        .times
        .iter()
        .zip(&traj.kappa_sup)
        .all(|(t, k)| *k <= k0 * (-t).exp() * (1.0 + 1e-12));
    let (rate, _) = decay_report(&traj, (1.0, 3.0))?;
    Ok((
        bound_ok && (2.8..=3.2).contains(&rate),
        format!("rate-1 envelope {}, fitted rate {rate:.4} on [1,3]", ok_word(bound_ok)),
    ))
}

fn ac04_fixed_limit(_: u64) -> Result<(bool, String)> {
    let mut worst_var = 0.0f64;
    let mut worst_res = 0.0f64;
    for h in [
        Harmonics::new().cos(2, 0.05),
        Harmonics::new().sin(1, 0.1).sin(3, 0.05),
        Harmonics::new().sin(1, 0.1).cos(1, 0.05).cos(3, 0.02).sin(5, 0.005),
    ] {
        let traj = flow(&sample(h)?, &FlowConfig::with_t_end(5.0))?;
        worst_var = worst_var.max(traj.fit_variation(2.0, 5.0));
        worst_res = worst_res.max(fit_great_circle(traj.last()).residual_sup);
    }
    Ok((
        worst_var <= 1e-4 && worst_res <= 1e-5,
        format!("fit variation on [2,5] {worst_var:.3e}, final residual {worst_res:.3e}"),
    ))
}

/// Random area-bisecting profiles within `C¹` distance `POINCARE_DELTA0` of their fitted great circle.
pub fn near_great_circle_sample(seed: u64, count: usize) -> Result<Vec<(PeriodicProfile, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.gen_range(-0.1..0.1);
        let b = rng.gen_range(-0.1..0.1);
        let mut pert = Harmonics::new();
        for n in 2..=6u32 {
            let scale = 1.0 / (n as f64).powi(3);
            pert = pert.sin(n, rng.gen_range(-1.0..1.0) * scale).cos(n, rng.gen_range(-1.0..1.0) * scale);
        }
        let p = pert.sample(N)?;
        let target = rng.gen_range(0.001..0.009);
        let scale = target / ck_norm(&p, 1)?;
        let gc = sample(Harmonics::new().sin(1, a).cos(1, b))?;
        let h = bisecting_shift(&(&gc + &(&p * scale)))?;
        let fit = fit_great_circle(&h).sample(N)?;
        let delta = ck_distance(&h, &fit, 1)?;
        if delta <= POINCARE_DELTA0 {
            out.push((h, delta));
        }
    }
    Ok(out)
}

fn ac05_poincare(seed: u64) -> Result<(bool, String)> {
    let sample = near_great_circle_sample(seed, 200)?;
    let ratios = sample
        .par_iter()
        .map(|(h, _)| poincare_ratio(h))
        .collect::<Result<Vec<f64>>>()?;
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let bad = ratios.iter().filter(|&&r| r > POINCARE_BOUND).count();
    Ok((bad == 0, format!("{} profiles, worst ratio {worst:.4} (bound 0.4), {bad} violations", ratios.len())))
}

/// `(|∫κu ds|, |∫κw ds|, ‖u − sin s‖_{C⁰})` for one profile.
pub fn rotation_diagnostics(h: &PeriodicProfile) -> (f64, f64, f64) {
    let (u, w) = rotation_test_functions(h);
    let k = curvature_of_profile(h);
    let (ds, _) = arclength_and_length(h);
    let iu: f64 = (0..h.len()).map(|j| k.samples()[j] * u.samples()[j] * ds[j]).sum();
    let iw: f64 = (0..h.len()).map(|j| k.samples()[j] * w.samples()[j] * ds[j]).sum();
    let s = arclength_positions(h);
    let dev = (0..h.len()).map(|j| (u.samples()[j] - s[j].sin()).abs()).fold(0.0, f64::max);
    (iu.abs(), iw.abs(), dev)
}

fn ac06_rotation_fields(seed: u64) -> Result<(bool, String)> {
    let sample = near_great_circle_sample(seed, 200)?;
    let diags: Vec<(f64, f64, f64, f64)> = sample
        .par_iter()
        .map(|(h, delta)| {
            let (iu, iw, dev) = rotation_diagnostics(h);
            (iu, iw, dev, *delta)
        })
        .collect();
    let worst_int = diags.iter().map(|d| d.0.max(d.1)).fold(0.0, f64::max);
    let worst_ratio = diags.iter().map(|d| d.2 / d.3).fold(0.0, f64::max);
    Ok((
        worst_int <= 1e-8 && worst_ratio <= 2.0,
        format!("max |∫κu ds| {worst_int:.2e}, max ‖u − sin s‖/δ {worst_ratio:.4} (limit 2)"),
    ))
}

/// Random `(base, v0)` pairs whose `v0` has exactly `2m` transverse zeros, `m ∈ {1,2,3}`.
pub fn zero_count_pairs(seed: u64, count: usize) -> Result<Vec<(PeriodicProfile, PeriodicProfile, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a65_726f);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut base = Harmonics::new().sin(1, rng.gen_range(-0.1..0.1)).cos(1, rng.gen_range(-0.1..0.1));
        for n in 2..=5u32 {
            base = base.sin(n, rng.gen_range(-0.01..0.01)).cos(n, rng.gen_range(-0.01..0.01));
        }
        let m = 1 + out.len() % 3;
        let phase = rng.gen_range(0.0..2.0 * PI);
        let mut v = Harmonics::new()
            .sin(m as u32, phase.cos())
            .cos(m as u32, phase.sin());
        for n in 1..=6u32 {
            if n as usize != m {
                v = v.sin(n, rng.gen_range(-0.1..0.1)).cos(n, rng.gen_range(-0.1..0.1));
            }
        }
        let v0 = sample(v)?;
        let zc = count_transverse_zeros(&v0, DEFAULT_THETA)?;
        if zc.count == 2 * m && !zc.multiple_zero_flag {
            out.push((sample(base)?, v0, 2 * m));
        }
    }
    Ok(out)
}

fn ac07_zero_monotonicity(seed: u64) -> Result<(bool, String)> {
    let pairs = zero_count_pairs(seed, 50)?;
    let cfg = FlowConfig {
        t_end: 2.0,
        record_every: 50,
        ..Default::default()
    };
    let results = pairs
        .par_iter()
        .map(|(base, v0, _)| {
            let snaps = evolve(&VariationState::new(base.clone(), v0.clone())?, &cfg, false)?;
            snaps
                .iter()
                .map(|s| count_transverse_zeros(&s.v, DEFAULT_THETA).map(|z| z.count))
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<Vec<Vec<usize>>>>()?;
    let increases = results
        .iter()
        .filter(|c| c.windows(2).any(|w| w[1] > w[0]))
        .count();
    let drops = results.iter().filter(|c| c.last() < c.first()).count();
    Ok((
        increases == 0,
        format!("{} runs, {increases} with an increase, {drops} with a drop", results.len()),
    ))
}

fn ac08_v1_floor(_: u64) -> Result<(bool, String)> {
    let u0 = sample(Harmonics::new().cos(2, 0.05))?;
    let v0 = sample(Harmonics::new().sin(1, 1.0).sin(3, 0.3))?;
    if !check_p2_p3(&v0, DEFAULT_THETA) {
        return Err(CsfError::HypothesisNotMet("v0 must satisfy P2/P3".into()));
    }
    let cfg = FlowConfig::with_t_end(10.0);
    let snaps = evolve(&VariationState::new(u0, v0.clone())?, &cfg, false)?;
    let log: Vec<_> = snaps.iter().map(|s| (s.time, linearized_coefficients(&s.base))).collect();
    let cert = measure_coefficient_decay(&log, Some(&v0))?;
    let traj: Vec<_> = snaps.iter().map(|s| (s.time, fourier_coefficients(&s.v))).collect();
    let ok = v1_floor_check(&traj, &cert)?;
    let v1_end = traj.last().unwrap().1.get(1).norm();
    Ok((
        ok,
        format!(
            "epsilon6 {:.3e}, C {:.3e}, |v1(10)| {v1_end:.4}, |v1(0)| {:.4}",
            cert.epsilon6,
            cert.c,
            traj[0].1.get(1).norm()
        ),
    ))
}

/// Odd trigonometric polynomials of degree ≤ 9 that pass the P2/P3 test.
///
/// Each sine and cosine coefficient of harmonic `n` is drawn from `U(−1, 1)/n`.
pub fn p2p3_sample(seed: u64, count: usize) -> Result<Vec<PeriodicProfile>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c47);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut h = Harmonics::new();
        for n in [1u32, 3, 5, 7, 9] {
            let s = 1.0 / n as f64;
            h = h.sin(n, rng.gen_range(-1.0..1.0) * s).cos(n, rng.gen_range(-1.0..1.0) * s);
        }
        let f = sample(h)?;
        if check_p2_p3(&f, DEFAULT_THETA) {
            out.push(f);
        }
    }
    Ok(out)
}

fn ac09_linear_growth(seed: u64) -> Result<(bool, String)> {
    let fs = p2p3_sample(seed, 200)?;
    let res = fs
        .iter()
        .map(|f| verify_linear_growth(f, 32))
        .collect::<Result<Vec<(bool, f64)>>>()?;
    let bad = res.iter().filter(|r| !r.0).count();
    let worst = res.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok((bad == 0, format!("{} functions, {bad} violations, worst ratio {worst:.4}", res.len())))
}

fn ac10_ode_pde(_: u64) -> Result<(bool, String)> {
    let cfg = FlowConfig::with_t_end(1.0);
    let v0 = sample(Harmonics::new().sin(1, 1.0).sin(3, 0.3).cos(2, 0.2))?;
    let mut worst = 0.0f64;
    let mut c4 = 0.0f64;
    for base in [
        Harmonics::new().cos(2, 0.003),
        Harmonics::new().sin(1, 0.015).cos(3, 0.0004),
        Harmonics::new().cos(1, 0.02).sin(2, 0.0005).cos(4, 0.00005),
    ] {
        let u0 = sample(base)?;
        c4 = c4.max(ck_norm(&u0, 4)?);
        let pde = evolve(&VariationState::new(u0.clone(), v0.clone())?, &cfg, false)?;
        let v_pde = fourier_coefficients(&pde.last().unwrap().v);
        let v_ode = solve_truncated_ode(&u0, &truncate(&fourier_coefficients(&v0), 16), 16, &cfg)?;
        worst = worst.max(v_ode.l2_distance(&v_pde) / v_pde.l2_norm());
    }
    Ok((
        worst <= 1e-3 && c4 <= 0.05,
        format!("max relative L2 error {worst:.3e} (limit 1e-3), max base C4 norm {c4:.4}"),
    ))
}

/// Family snapshots at `t = 0`, each of `times` and nothing past the last.
pub fn family_snapshots(spec: &FamilySpec, chart: &ChartConfig, times: &[f64]) -> Result<Vec<FamilyGrid>> {
    let mut snaps = vec![make_family(spec, chart)?];
    for &t in times {
        let cur = snaps.last().unwrap();
        let dt = t - cur.time;
        if dt <= 0.0 {
            continue;
        }
        let cfg = FlowConfig {
            chart: *chart,
            ..FlowConfig::with_t_end(dt)
        };
        let next = flow_family(cur, &cfg)?.pop().unwrap();
        snaps.push(next);
    }
    Ok(snaps)
}

/// Smallest sup-distance between fitted `(a, b)` at `last` over member pairs
/// whose initial fits differ by at least `1e-2`.
pub fn limit_separation(first: &FamilyGrid, last: &FamilyGrid) -> f64 {
    let idx = first.indices();
    let mut min_sep = f64::INFINITY;
    for p in 0..idx.len() {
        for q in p + 1..idx.len() {
            let (f0a, f0b) = (fit_great_circle(first.get(idx[p])), fit_great_circle(first.get(idx[q])));
            if (f0a.a - f0b.a).abs().max((f0a.b - f0b.b).abs()) < 1e-2 {
                continue;
            }
            let (fa, fb) = (fit_great_circle(last.get(idx[p])), fit_great_circle(last.get(idx[q])));
            min_sep = min_sep.min((fa.a - fb.a).abs().max((fa.b - fb.b).abs()));
        }
    }
    min_sep
}

fn ac11_family(_: u64) -> Result<(bool, String)> {
    let snaps = family_snapshots(&FamilySpec::default(), &ChartConfig::default(), &[1.0, 5.0])?;
    let mut ok = true;
    let mut notes = Vec::new();
    let initial_margin = intersection_report(&snaps[0], DEFAULT_THETA)?.min_margin;
    for fam in &snaps {
        let rep = intersection_report(fam, DEFAULT_THETA)?;
        let spp = spp_local_check(fam, DEFAULT_THETA);
        let good = rep.all_counts_equal(2) && rep.min_margin >= 0.25 * initial_margin && spp.passed();
        ok &= good;
        notes.push(format!("t={}: min margin {:.4} spp {}", fam.time, rep.min_margin, ok_word(spp.passed())));
    }
    let min_sep = limit_separation(&snaps[0], snaps.last().unwrap());
    ok &= min_sep >= 1e-3;
    notes.push(format!("min limit separation {min_sep:.4}"));
    Ok((ok, notes.join("; ")))
}

pub struct ReparamCheck {
    pub reparam: Reparametrization,
    pub distances: Vec<(f64, f64)>,
    pub endpoints: bool,
    pub strictly_increasing: bool,
    pub flat: bool,
}

impl ReparamCheck {
    pub fn passed(&self) -> bool {
        self.endpoints && self.strictly_increasing && self.flat
    }
}

/// Builds `β` from a converged trajectory and checks endpoints, strict
/// monotonicity on `10⁴` points and flatness on `s ∈ [0.9, 0.999]`.
pub fn reparam_check(traj: &FlowTrajectory, k: usize, s_points: usize) -> Result<ReparamCheck> {
    let s_grid: Vec<f64> = (0..s_points).map(|i| i as f64 / (s_points - 1) as f64).collect();
    let distances = homotopy_distance_curve(traj, k, &s_grid)?;
    let reparam = build_reparametrization(&distances)?;
    let endpoints = reparam.beta(0.0) == 0.0 && reparam.beta(1.0) == 1.0;
    let mut prev = f64::INFINITY;
    let mut strictly_increasing = true;
    for i in 0..10_000 {
        let g = reparam.log_gap(i as f64 / 9_999.0);
        strictly_increasing &= g < prev;
        prev = g;
    }
    let curve = DistanceCurve::new(traj, k)?;
    let mut flat = true;
    for i in 0..=99 {
        let s = 0.9 + 0.099 * i as f64 / 99.0;
        let dist = curve.at_gap(reparam.log_gap(s));
        flat &= dist == 0.0 || dist.ln() <= reparam.log_flatness_bound(s);
    }
    Ok(ReparamCheck {
        reparam,
        distances,
        endpoints,
        strictly_increasing,
        flat,
    })
}

fn ac12_reparametrization(_: u64) -> Result<(bool, String)> {
    let h0 = sample(Harmonics::new().cos(2, 0.05))?;
    let traj = flow(&h0, &FlowConfig::with_t_end(10.0))?;
    let rc = reparam_check(&traj, 2, 2001)?;
    Ok((
        rc.passed(),
        format!(
            "endpoints {}, strictly increasing {}, flatness {}, {} rho knots",
            ok_word(rc.endpoints),
            ok_word(rc.strictly_increasing),
            ok_word(rc.flat),
            rc.reparam.rho_knots.len()
        ),
    ))
}

/// Sup-norm mismatches of the first and second variations against central
/// differences of the nonlinear flow, at `ε` and `ε/2`.
pub fn oracle_mismatches(
    u0: &PeriodicProfile,
    v0: &PeriodicProfile,
    eps: f64,
    cfg: &FlowConfig,
) -> Result<([f64; 2], [f64; 2])> {
    let snaps = evolve(&VariationState::new(u0.clone(), v0.clone())?, cfg, true)?;
    let end = snaps.last().unwrap();
    let w2 = end.w2.as_ref().unwrap();
    let h_mid = flow(u0, cfg)?.last().clone();
    let mut first = [0.0; 2];
    let mut second = [0.0; 2];
    for (k, e) in [eps, eps / 2.0].into_iter().enumerate() {
        let hp = flow(&(u0 + &(v0 * e)), cfg)?.last().clone();
        let hm = flow(&(u0 - &(v0 * e)), cfg)?.last().clone();
        let d1 = hp.zip_map(&hm, |p, m| (p - m) / (2.0 * e))?;
        first[k] = (&d1 - &end.v).sup_norm();
        let d2 = PeriodicProfile::new(
            (0..hp.len())
                .map(|j| (hp.samples()[j] - 2.0 * h_mid.samples()[j] + hm.samples()[j]) / (2.0 * e * e))
                .collect(),
        )?;
        second[k] = (&d2 - w2).sup_norm();
    }
    Ok((first, second))
}

fn ac13_oracles(_: u64) -> Result<(bool, String)> {
    let u0 = sample(Harmonics::new().cos(2, 0.05))?;
    let v0 = sample(Harmonics::new().sin(1, 1.0))?;
    let (first, second) = oracle_mismatches(&u0, &v0, 1e-2, &FlowConfig::with_t_end(1.0))?;
    let (r1, r2) = (first[0] / first[1], second[0] / second[1]);
    Ok((
        halving_ratio_ok(r1) && halving_ratio_ok(r2),
        format!(
            "first variation {:.3e} -> {:.3e} (ratio {r1:.3}), second {:.3e} -> {:.3e} (ratio {r2:.3})",
            first[0], first[1], second[0], second[1]
        ),
    ))
}

fn ok_word(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

/// Error ratio under `ε → ε/2` consistent with second order.
pub fn halving_ratio_ok(r: f64) -> bool {
    (3.5..=4.5).contains(&r)
}
