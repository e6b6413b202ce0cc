//! Two-parameter families of curves near a great circle: flowing them,
//! counting pairwise intersections, the variation-field submersion test, and
//! the time change `β` that closes the flow into a homotopy on `[0, 1]`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csf_solver::{flow, FlowConfig, FlowTrajectory};
use crate::error::{CsfError, Result};
use crate::profile::PeriodicProfile;
use crate::quadrature;
use crate::sphere_chart::{ck_distance, fit_great_circle, is_rp2_symmetric_tol, ChartConfig, RP2_TOL};
use crate::variation_flows::count_transverse_zeros;

pub type Index = (usize, usize);

/// Number of sampled directions in the submersion check.
pub const DIRECTIONS: usize = 8;
/// Convergence required of a trajectory before building a homotopy from it.
pub const CONVERGED_RESIDUAL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyGrid {
    pub tau_values: Vec<f64>,
    pub eta_values: Vec<f64>,
    /// `profiles[i][j]` sits at `(tau_values[i], eta_values[j])`.
    pub profiles: Vec<Vec<PeriodicProfile>>,
    pub time: f64,
}

impl FamilyGrid {
    pub fn shape(&self) -> (usize, usize) {
        (self.tau_values.len(), self.eta_values.len())
    }

    pub fn get(&self, idx: Index) -> &PeriodicProfile {
        &self.profiles[idx.0][idx.1]
    }

    pub fn indices(&self) -> Vec<Index> {
        let (nt, ne) = self.shape();
        (0..nt).flat_map(|i| (0..ne).map(move |j| (i, j))).collect()
    }

    /// Index of the member closest to `(τ, η) = (0, 0)`.
    pub fn base_index(&self) -> Index {
        let closest = |v: &[f64]| {
            (0..v.len())
                .min_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
                .unwrap_or(0)
        };
        (closest(&self.tau_values), closest(&self.eta_values))
    }

    pub fn base(&self) -> &PeriodicProfile {
        self.get(self.base_index())
    }
}

/// `H(x; τ, η) = (a₀+τ) sin x + (b₀+η) cos x + Σ q_n[(1 + s/2) sin nx + (t/2) cos nx]`
/// with `s = τ/τ_max`, `t = η/η_max` and odd `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilySpec {
    pub base_a: f64,
    pub base_b: f64,
    pub tau_max: f64,
    pub eta_max: f64,
    pub n_tau: usize,
    pub n_eta: usize,
    /// `(n, q_n)` pairs.
    pub perturbation: Vec<(u32, f64)>,
    pub grid_size: usize,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            base_a: 0.0,
            base_b: 0.0,
            tau_max: 0.1,
            eta_max: 0.1,
            n_tau: 3,
            n_eta: 3,
            perturbation: vec![(3, 0.02), (5, 0.01)],
            grid_size: 256,
        }
    }
}

impl FamilySpec {
    pub fn great_circles() -> Self {
        FamilySpec {
            perturbation: vec![],
            ..Default::default()
        }
    }

    fn axis(max: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![0.0];
        }
        (0..count)
            .map(|i| -max + 2.0 * max * i as f64 / (count - 1) as f64)
            .collect()
    }

    pub fn member(&self, tau: f64, eta: f64) -> impl Fn(f64) -> f64 + '_ {
        let s = if self.tau_max > 0.0 { tau / self.tau_max } else { 0.0 };
        let t = if self.eta_max > 0.0 { eta / self.eta_max } else { 0.0 };
        move |x: f64| {
            let mut h = (self.base_a + tau) * x.sin() + (self.base_b + eta) * x.cos();
            for &(n, q) in &self.perturbation {
                let nx = n as f64 * x;
                h += q * ((1.0 + 0.5 * s) * nx.sin() + 0.5 * t * nx.cos());
            }
            h
        }
    }
}

/// Builds the grid and checks chart membership, distinctness and that every
/// pair meets in exactly two transverse points on the lift.
pub fn make_family(spec: &FamilySpec, chart: &ChartConfig) -> Result<FamilyGrid> {
    if spec.n_tau == 0 || spec.n_eta == 0 {
        return Err(CsfError::InvalidConfig("family needs at least one value per parameter".into()));
    }
    if let Some(&(n, _)) = spec.perturbation.iter().find(|(n, _)| n % 2 == 0) {
        return Err(CsfError::InvalidConfig(format!(
            "perturbation harmonic {n} is even and breaks antipodal symmetry"
        )));
    }
    let tau_values = FamilySpec::axis(spec.tau_max, spec.n_tau);
    let eta_values = FamilySpec::axis(spec.eta_max, spec.n_eta);
    let mut profiles = Vec::with_capacity(tau_values.len());
    for &tau in &tau_values {
        let mut row = Vec::with_capacity(eta_values.len());
        for &eta in &eta_values {
            let h = PeriodicProfile::from_fn(spec.grid_size, spec.member(tau, eta))?;
            chart.check(&h, 0.0)?;
            row.push(h);
        }
        profiles.push(row);
    }
    let fam = FamilyGrid {
        tau_values,
        eta_values,
        profiles,
        time: 0.0,
    };
    let report = intersection_report(&fam, 0.0)?;
    if let Some(p) = report.pairs.iter().find(|p| p.count != 2) {
        return Err(CsfError::ExtraIntersections {
            a: p.a,
            b: p.b,
            count: p.count,
        });
    }
    Ok(fam)
}

/// Flows every member with the same configuration; snapshots are aligned in time.
pub fn flow_family(fam: &FamilyGrid, cfg: &FlowConfig) -> Result<Vec<FamilyGrid>> {
    let indices = fam.indices();
    let results: Vec<Result<FlowTrajectory>> = indices.par_iter().map(|&idx| flow(fam.get(idx), cfg)).collect();
    let mut trajs = Vec::with_capacity(results.len());
    for (idx, r) in indices.iter().zip(results) {
        trajs.push(r.map_err(|e| CsfError::Member {
            index: *idx,
            source: Box::new(e),
        })?);
    }
    let (nt, ne) = fam.shape();
    let times = trajs[0].times.clone();
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| FamilyGrid {
            tau_values: fam.tau_values.clone(),
            eta_values: fam.eta_values.clone(),
            profiles: (0..nt)
                .map(|i| (0..ne).map(|j| trajs[i * ne + j].profiles[k].clone()).collect())
                .collect(),
            time: fam.time + t,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCount {
    pub a: Index,
    pub b: Index,
    pub count: usize,
    pub min_margin: f64,
    pub multiple: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub pairs: Vec<PairCount>,
    pub min_margin: f64,
    pub multiple_zero_pairs: Vec<(Index, Index)>,
}

impl IntersectionReport {
    /// Intersections in the projective plane: half the lift count.
    pub fn rp2_count(pair: &PairCount) -> usize {
        pair.count / 2
    }

    pub fn all_counts_equal(&self, n: usize) -> bool {
        self.pairs.iter().all(|p| p.count == n)
    }
}

/// Zero counts of every pairwise difference, in row-major pair order.
pub fn intersection_report(fam: &FamilyGrid, theta: f64) -> Result<IntersectionReport> {
    let idx = fam.indices();
    let pairs_idx: Vec<(Index, Index)> = (0..idx.len())
        .flat_map(|p| (p + 1..idx.len()).map(move |q| (p, q)))
        .map(|(p, q)| (idx[p], idx[q]))
        .collect();
    let counted: Vec<Result<PairCount>> = pairs_idx
        .par_iter()
        .map(|&(a, b)| {
            let diff = fam.get(a).zip_map(fam.get(b), |x, y| x - y)?;
            if diff.sup_norm() < 1e-14 {
                return Err(CsfError::IdenticalProfiles(a, b));
            }
            let zc = count_transverse_zeros(&diff, theta)?;
            Ok(PairCount {
                a,
                b,
                count: zc.count,
                min_margin: zc.min_margin(),
                multiple: zc.multiple_zero_flag,
            })
        })
        .collect();
    let pairs = counted.into_iter().collect::<Result<Vec<_>>>()?;
    let min_margin = pairs.iter().map(|p| p.min_margin).fold(f64::INFINITY, f64::min);
    let multiple_zero_pairs = pairs.iter().filter(|p| p.multiple).map(|p| (p.a, p.b)).collect();
    Ok(IntersectionReport {
        pairs,
        min_margin,
        multiple_zero_pairs,
    })
}

/// Normal component of the family's variation at `index` along `direction`,
/// scaled to unit sup-norm.
///
/// A vertical chart displacement `δh` moves the curve normally by
/// `δh/(√(1+h²)·√(1+h²+h_x²))`; that positive factor is applied pointwise.
pub fn normal_variation_field(fam: &FamilyGrid, index: Index, direction: (f64, f64)) -> Result<PeriodicProfile> {
    let (nt, ne) = fam.shape();
    let (i, j) = index;
    if i == 0 || j == 0 || i + 1 >= nt || j + 1 >= ne {
        return Err(CsfError::BoundaryIndex(i, j));
    }
    let d_tau = fam.tau_values[i + 1] - fam.tau_values[i - 1];
    let d_eta = fam.eta_values[j + 1] - fam.eta_values[j - 1];
    let h_tau = fam.profiles[i + 1][j].zip_map(&fam.profiles[i - 1][j], |p, q| (p - q) / d_tau)?;
    let h_eta = fam.profiles[i][j + 1].zip_map(&fam.profiles[i][j - 1], |p, q| (p - q) / d_eta)?;
    let norm = (direction.0 * direction.0 + direction.1 * direction.1).sqrt();
    let (dt, de) = (direction.0 / norm, direction.1 / norm);
    let h = fam.get(index);
    let hx = h.derivative(1);
    let field: Vec<f64> = (0..h.len())
        .map(|k| {
            let z = h.samples()[k];
            let p = 1.0 + z * z;
            let factor = 1.0 / (p.sqrt() * (p + hx.samples()[k].powi(2)).sqrt());
            (dt * h_tau.samples()[k] + de * h_eta.samples()[k]) * factor
        })
        .collect();
    let sup = field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup < 10.0 * f64::EPSILON {
        return Err(CsfError::NumericallyZero(sup));
    }
    PeriodicProfile::new(field.into_iter().map(|v| v / sup).collect())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SppDiagnostics {
    pub pair_failures: Vec<(Index, Index, usize, f64)>,
    /// `(index, direction angle, zero count)`
    pub direction_failures: Vec<(Index, f64, usize)>,
    pub errors: Vec<String>,
}

impl SppDiagnostics {
    pub fn passed(&self) -> bool {
        self.pair_failures.is_empty() && self.direction_failures.is_empty() && self.errors.is_empty()
    }
}

/// Every pair meets twice on the lift with margins at least `theta`, and every
/// interior variation field along the sampled directions has exactly two
/// transverse zeros.
pub fn spp_local_check(fam: &FamilyGrid, theta: f64) -> SppDiagnostics {
    let mut diag = SppDiagnostics::default();
    let (nt, ne) = fam.shape();
    if nt < 3 || ne < 3 {
        diag.errors.push(format!("grid {nt}x{ne} is smaller than 3x3"));
        return diag;
    }
    match intersection_report(fam, theta) {
        Ok(rep) => {
            for p in rep.pairs {
                if p.count != 2 || p.min_margin < theta || p.multiple {
                    diag.pair_failures.push((p.a, p.b, p.count, p.min_margin));
                }
            }
        }
        Err(e) => diag.errors.push(e.to_string()),
    }
    for i in 1..nt - 1 {
        for j in 1..ne - 1 {
            for k in 0..DIRECTIONS {
                let ang = PI * k as f64 / DIRECTIONS as f64;
                let outcome = normal_variation_field(fam, (i, j), (ang.cos(), ang.sin()))
                    .and_then(|f| count_transverse_zeros(&f, theta));
                match outcome {
                    Ok(zc) if zc.count == 2 && !zc.multiple_zero_flag => {}
                    Ok(zc) => diag.direction_failures.push(((i, j), ang, zc.count)),
                    Err(e) => diag.errors.push(format!("({i}, {j}) at angle {ang}: {e}")),
                }
            }
        }
    }
    diag
}

/// True when every member is antipodally odd.
pub fn is_rp2_family(fam: &FamilyGrid) -> bool {
    fam.indices()
        .iter()
        .all(|&i| is_rp2_symmetric_tol(fam.get(i), RP2_TOL))
}

/// `C^k` distance of a converged trajectory to its limiting great circle as a
/// function of flow time, or of `s ∈ [0, 1]` through `t = s/(1−s)`.
///
/// Between snapshots the profile is interpolated linearly in time. Past the
/// last snapshot the distance is continued as `d(t_end)·e^{−(t−t_end)}`, the
/// slowest decay the flow allows near a great circle.
pub struct DistanceCurve {
    times: Vec<f64>,
    distances: Vec<f64>,
}

impl DistanceCurve {
    pub fn new(traj: &FlowTrajectory, k: usize) -> Result<Self> {
        let last = traj.last();
        let fit = fit_great_circle(last);
        if fit.residual_sup > CONVERGED_RESIDUAL {
            return Err(CsfError::Unconverged(fit.residual_sup));
        }
        let limit = fit.sample(last.len())?;
        let distances = traj
            .profiles
            .iter()
            .map(|p| ck_distance(p, &limit, k))
            .collect::<Result<Vec<f64>>>()?;
        Ok(DistanceCurve {
            times: traj.times.clone(),
            distances,
        })
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn at_time(&self, t: f64) -> f64 {
        let t_end = self.t_end();
        if t >= t_end {
            if t.is_infinite() {
                return 0.0;
            }
            return self.distances.last().unwrap() * (-(t - t_end)).exp();
        }
        let k = self.times.partition_point(|&s| s <= t).max(1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        (1.0 - w) * self.distances[k - 1] + w * self.distances[k]
    }

    pub fn at_s(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        self.at_time(s / (1.0 - s))
    }

    /// Distance at `σ` given `log(1−σ)`, usable when `σ` rounds to 1.
    pub fn at_gap(&self, log_gap: f64) -> f64 {
        let g = log_gap.exp();
        if g == 0.0 {
            return 0.0;
        }
        self.at_time((1.0 - g) / g)
    }
}

/// Samples `d(s)` replaced by their right envelope `sup_{σ≥s} d(σ)`, with `d(1) = 0`.
pub fn homotopy_distance_curve(traj: &FlowTrajectory, k: usize, s_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let curve = DistanceCurve::new(traj, k)?;
    let mut pts: Vec<(f64, f64)> = s_grid.iter().map(|&s| (s, curve.at_s(s))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut env = 0.0f64;
    for p in pts.iter_mut().rev() {
        env = env.max(p.1);
        p.1 = env;
    }
    Ok(pts)
}

/// `log ∫_0^r e^{−u⁻²} du = −1/r² + log(r³/2) + log ∫_0^∞ e^{−v}(1+r²v)^{−3/2} dv`.
pub fn log_bump_integral(r: f64) -> f64 {
    if r <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let r2 = r * r;
    let g = quadrature::integrate(|v| (-v).exp() * (1.0 + r2 * v).powf(-1.5), 0.0, 60.0, 1e-15);
    -1.0 / r2 + (0.5 * r2 * r).ln() + g.ln()
}

/// Monotone cubic Hermite interpolation (Fritsch–Carlson slopes).
#[derive(Clone, Debug)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = delta[0];
        m[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                m[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Pchip { x, y, m }
    }

    fn eval_on(&self, i: usize, s: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let t = (s - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.y[i]
            + (t3 - 2.0 * t2 + t) * h * self.m[i]
            + (-2.0 * t3 + 3.0 * t2) * self.y[i + 1]
            + (t3 - t2) * h * self.m[i + 1]
    }

    fn eval(&self, s: f64) -> f64 {
        let i = self.x.partition_point(|&k| k <= s).clamp(1, self.x.len() - 1) - 1;
        self.eval_on(i, s)
    }
}

/// `ρ` and `β` of the closing time change.
///
/// `ρ` has knots `(0, ρ(1/2)+1)` and `(1−1/n, 1/n + sup_{σ≥1−1/(n−1)} d(σ))`
/// up to the first `n` where the supremum vanishes; past that knot `ρ(s) = 1−s`.
/// `β(s) = ρ⁻¹(ρ(0)·J(1−s)/J(1))` with `J(r) = ∫_0^r e^{−u⁻²} du`. Because `β`
/// reaches 1 faster than any power, it is stored through `log(1−β)`.
#[derive(Clone, Debug)]
pub struct Reparametrization {
    pub rho_knots: Vec<(f64, f64)>,
    rho: Pchip,
    log_j1: f64,
}

impl Reparametrization {
    pub fn rho0(&self) -> f64 {
        self.rho_knots[0].1
    }

    pub fn rho(&self, s: f64) -> f64 {
        let (s_last, _) = *self.rho_knots.last().unwrap();
        if s >= s_last {
            (1.0 - s).max(0.0)
        } else {
            self.rho.eval(s.max(0.0))
        }
    }

    /// `log J(1)`.
    pub fn log_bump_total(&self) -> f64 {
        self.log_j1
    }

    /// `log(1 − β(s))`.
    pub fn log_gap(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let log_y = self.rho0().ln() + log_bump_integral(1.0 - s) - self.log_j1;
        let (s_last, rho_last) = *self.rho_knots.last().unwrap();
        if log_y <= rho_last.ln() {
            // tail: ρ(σ) = 1 − σ
            return log_y;
        }
        let y = log_y.exp();
        (1.0 - self.rho_inverse(y, s_last)).ln()
    }

    fn rho_inverse(&self, y: f64, s_last: f64) -> f64 {
        let knots = &self.rho_knots;
        if y >= knots[0].1 {
            return 0.0;
        }
        // knots[i].1 > y ≥ knots[i+1].1
        let i = knots.partition_point(|k| k.1 > y) - 1;
        let (mut lo, mut hi) = (knots[i].0, knots[(i + 1).min(knots.len() - 1)].0.min(s_last));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.rho.eval_on(i, mid) > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn beta(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        -self.log_gap(s).exp_m1()
    }

    /// `log(ρ(0)(1−s)e^{−(1−s)⁻²}/J(1))`, the flatness envelope at `s`.
    pub fn log_flatness_bound(&self, s: f64) -> f64 {
        let r = 1.0 - s;
        self.rho0().ln() + r.ln() - 1.0 / (r * r) - self.log_j1
    }

    /// Rows `(s, β(s), ρ(s))` on a uniform grid of `points` values.
    pub fn table(&self, points: usize) -> Vec<(f64, f64, f64)> {
        (0..points)
            .map(|i| {
                let s = i as f64 / (points - 1) as f64;
                (s, self.beta(s), self.rho(s))
            })
            .collect()
    }
}

pub fn build_reparametrization(d_samples: &[(f64, f64)]) -> Result<Reparametrization> {
    let mut pts = d_samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let last = pts.last().ok_or(CsfError::EmptyLog)?;
    if (last.0 - 1.0).abs() > 1e-12 || last.1 != 0.0 {
        return Err(CsfError::DistanceNotVanishing(last.1));
    }
    if let Some(p) = pts.iter().find(|p| !(p.1 >= 0.0) || p.0 < 0.0) {
        return Err(CsfError::InvalidConfig(format!("invalid distance sample ({}, {})", p.0, p.1)));
    }
    // right envelope D(s) = sup_{σ ≥ s} d(σ)
    let mut env = vec![0.0; pts.len()];
    let mut m = 0.0f64;
    for i in (0..pts.len()).rev() {
        m = m.max(pts[i].1);
        env[i] = m;
    }
    let sup_from = |s: f64| -> f64 {
        let i = pts.partition_point(|p| p.0 < s - 1e-15);
        if i >= pts.len() {
            0.0
        } else {
            env[i]
        }
    };
    let mut knots = Vec::new();
    let mut n = 2usize;
    loop {
        let s_prev = if n == 2 { 0.0 } else { 1.0 - 1.0 / (n - 1) as f64 };
        let d = sup_from(s_prev);
        knots.push((1.0 - 1.0 / n as f64, 1.0 / n as f64 + d));
        if d == 0.0 {
            break;
        }
        n += 1;
        if n > 10_000_000 {
            return Err(CsfError::DistanceNotVanishing(d));
        }
    }
    let rho0 = knots[0].1 + 1.0;
    knots.insert(0, (0.0, rho0));
    let (xs, ys): (Vec<f64>, Vec<f64>) = knots.iter().copied().unzip();
    Ok(Reparametrization {
        rho: Pchip::new(xs, ys),
        rho_knots: knots,
        log_j1: log_bump_integral(1.0),
    })
}
