//! JSON-configured experiment runs that write CSV/JSON artifacts and a summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acceptance::{self, halving_ratio_ok, oracle_mismatches, reparam_check, DEFAULT_SEED};
use crate::csf_solver::{decay_report, flow, FlowConfig};
use crate::error::{CsfError, Result};
use crate::family::{intersection_report, spp_local_check, FamilySpec};
use crate::io::{read_csv, Cell, CsvTable};
use crate::profile::{Basis, Harmonics, PeriodicProfile};
use crate::spectral_analysis::{
    check_p2_p3, fourier_coefficients, measure_coefficient_decay, solve_truncated_ode, truncate, v1_floor_check,
    verify_linear_growth,
};
use crate::sphere_chart::{bisection_defect, ck_norm, fit_great_circle, is_rp2_symmetric, ChartConfig, BISECTION_TOL};
use crate::variation_flows::{count_transverse_zeros, evolve, linearized_coefficients, VariationState, DEFAULT_THETA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Flow,
    Linearize,
    W2,
    Spectrum,
    Family,
    Homotopy,
    Acceptance,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Flow => "flow",
            Kind::Linearize => "linearize",
            Kind::W2 => "w2",
            Kind::Spectrum => "spectrum",
            Kind::Family => "family",
            Kind::Homotopy => "homotopy",
            Kind::Acceptance => "acceptance",
        }
    }
}

fn d_t_end() -> f64 {
    5.0
}
fn d_record_every() -> usize {
    100
}
fn d_stability_cap() -> f64 {
    0.28
}
fn d_seed() -> u64 {
    DEFAULT_SEED
}
fn d_theta() -> f64 {
    DEFAULT_THETA
}
fn d_fit_window() -> [f64; 2] {
    [1.0, 3.0]
}
fn d_n_cut() -> usize {
    16
}
fn d_family_times() -> Vec<f64> {
    vec![1.0]
}
fn d_distance_order() -> usize {
    2
}
fn d_s_points() -> usize {
    2001
}
fn d_epsilon() -> f64 {
    1e-2
}
fn d_out_dir() -> PathBuf {
    PathBuf::from("csf-out")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    /// `h0` for flows, the base `u0` for variations.
    #[serde(default)]
    pub initial: Harmonics,
    /// `v0`; defaults to `sin x`.
    #[serde(default)]
    pub variation: Option<Harmonics>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "d_t_end")]
    pub t_end: f64,
    #[serde(default = "d_record_every")]
    pub record_every: usize,
    #[serde(default = "d_stability_cap")]
    pub stability_cap: f64,
    #[serde(default)]
    pub chart: ChartConfig,
    #[serde(default = "d_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_theta")]
    pub theta: f64,
    #[serde(default = "d_fit_window")]
    pub fit_window: [f64; 2],
    #[serde(default = "d_n_cut")]
    pub n_cut: usize,
    #[serde(default)]
    pub family: FamilySpec,
    /// Intermediate family snapshot times; `0` and `t_end` are always recorded.
    #[serde(default = "d_family_times")]
    pub family_times: Vec<f64>,
    #[serde(default = "d_distance_order")]
    pub distance_order: usize,
    #[serde(default = "d_s_points")]
    pub s_points: usize,
    /// Largest step of the finite-difference oracle in `w2` runs.
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    /// Criterion ids for `acceptance` runs; empty means all.
    #[serde(default)]
    pub criteria: Vec<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CsfError::InvalidConfig(e.to_string()))
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            dt: self.dt,
            t_end: self.t_end,
            record_every: self.record_every,
            stability_cap: self.stability_cap,
            chart: self.chart,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = self.flow_config();
        cfg.validate()?;
        cfg.dt_for(self.chart.grid_size)?;
        let bad = |field: &str, why: &str| Err(CsfError::InvalidConfig(format!("{field}: {why}")));
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad("theta", "must lie in (0, 1)");
        }
        if !(self.fit_window[0] < self.fit_window[1]) {
            return bad("fit_window", "needs lo < hi");
        }
        if self.s_points < 3 {
            return bad("s_points", "needs at least 3 points");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "must be positive");
        }
        if self.family_times.iter().any(|t| !(*t > 0.0)) {
            return bad("family_times", "must be positive");
        }
        if let Some(id) = self.criteria.iter().find(|id| !(1..=13).contains(*id)) {
            return bad("criteria", &format!("no criterion {id}"));
        }
        Ok(())
    }

    fn profile(&self, field: &str, h: &Harmonics) -> Result<PeriodicProfile> {
        let p = h
            .sample(self.chart.grid_size)
            .map_err(|e| CsfError::InvalidConfig(format!("{field}: {e}")))?;
        if field == "initial" {
            self.chart
                .check(&p, 0.0)
                .map_err(|e| CsfError::InvalidConfig(format!("{field}: {e}")))?;
        }
        Ok(p)
    }

    fn variation_profile(&self) -> Result<PeriodicProfile> {
        let v = self.variation.clone().unwrap_or_else(|| Harmonics::new().sin(1, 1.0));
        self.profile("variation", &v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    /// The acceptance criterion this flag instantiates.
    pub criterion: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: Kind,
    pub seed: u64,
    pub wall_time: f64,
    pub scalars: BTreeMap<String, f64>,
    pub flags: Vec<Flag>,
    pub artifacts: Vec<String>,
    pub out_dir: PathBuf,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }

    fn flag(&mut self, name: &str, criterion: usize, passed: bool) {
        self.flags.push(Flag {
            name: name.to_string(),
            criterion,
            passed,
        });
    }

    fn scalar(&mut self, name: &str, v: f64) {
        self.scalars.insert(name.to_string(), v);
    }

    fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        table.write(&self.out_dir.join(name))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        std::fs::write(self.out_dir.join(name), serde_json::to_string_pretty(value)?)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

/// Exit status: 0 pass, 1 invariant failure, 2 usage error, 3 numeric abort.
pub fn exit_code(result: &Result<RunSummary>) -> i32 {
    match result {
        Ok(s) if s.passed() => 0,
        Ok(_) => 1,
        Err(e) if e.is_numeric_abort() => 3,
        Err(CsfError::InvalidConfig(_) | CsfError::InvalidGrid(_) | CsfError::Json(_) | CsfError::Io(_)) => 2,
        Err(_) => 1,
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let start = Instant::now();
    let mut s = RunSummary {
        kind: config.kind,
        seed: config.seed,
        wall_time: 0.0,
        scalars: BTreeMap::new(),
        flags: Vec::new(),
        artifacts: Vec::new(),
        out_dir: config.out_dir.clone(),
    };
    match config.kind {
        Kind::Flow => run_flow(config, &mut s)?,
        Kind::Linearize => run_linearize(config, &mut s)?,
        Kind::W2 => run_w2(config, &mut s)?,
        Kind::Spectrum => run_spectrum(config, &mut s)?,
        Kind::Family => run_family(config, &mut s)?,
        Kind::Homotopy => run_homotopy(config, &mut s)?,
        Kind::Acceptance => run_acceptance(config, &mut s)?,
    }
    s.write_json("config.json", config)?;
    emit_plot_data(&s)?;
    s.artifacts.push(PLOT_FILE.to_string());
    s.wall_time = start.elapsed().as_secs_f64();
    s.artifacts.push("summary.json".to_string());
    std::fs::write(s.out_dir.join("summary.json"), serde_json::to_string_pretty(&s)?)?;
    Ok(s)
}

fn only_first_harmonics(h: &Harmonics) -> bool {
    h.terms
        .iter()
        .all(|(b, a)| matches!(b, Basis::Sin(1) | Basis::Cos(1)) || *a == 0.0)
}

fn run_flow(config: &ExperimentConfig, s: &mut RunSummary) -> Result<()> {
    let h0 = config.profile("initial", &config.initial)?;
    let traj = flow(&h0, &config.flow_config())?;
    let mut table = CsvTable::new(&["t", "kappa_sup", "length", "defect", "a_fit", "b_fit", "residual"]);
    for (i, fit) in traj.fits().into_iter().enumerate() {
        table.push(vec![
            traj.times[i].into(),
            traj.kappa_sup[i].into(),
            traj.lengths[i].into(),
            traj.defects[i].into(),
            fit.a.into(),
            fit.b.into(),
            fit.residual_sup.into(),
        ]);
    }
    s.write_csv("trajectory.csv", &table)?;
    s.write_json("snapshots.json", &traj)?;

    let drift = (traj.last() - &h0).sup_norm();
    let residual = fit_great_circle(traj.last()).residual_sup;
    s.scalar("drift", drift);
    s.scalar("final_residual", residual);
    s.scalar("final_length", *traj.lengths.last().unwrap());
    let [lo, hi] = config.fit_window;
    if let Ok((rate, k)) = decay_report(&traj, (lo, hi.min(config.t_end))) {
        s.scalar("fitted_rate", rate);
        s.scalar("fitted_constant", k);
    }
    if only_first_harmonics(&config.initial) {
        s.flag("stationary", 1, drift <= 1e-6);
    }
    if is_rp2_symmetric(&h0) {
        let worst = traj.defects.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        s.scalar("max_defect", worst);
        s.flag("bisection_conserved", 2, worst <= 1e-7);
    }
    let bisecting = bisection_defect(&h0).abs() <= BISECTION_TOL;
    if bisecting && !only_first_harmonics(&config.initial) {
        let k0 = traj.kappa_sup[0];
        let env = traj
            .times
            .iter()
            .zip(&traj.kappa_sup)
            .all(|(t, k)| *k <= k0 * (-t).exp() * (1.0 + 1e-12));
        s.flag("curvature_envelope", 3, env);
        if config.t_end >= 5.0 {
            let var = traj.fit_variation(2.0, config.t_end);
            s.scalar("fit_variation", var);
            s.flag("fixed_limit", 4, var <= 1e-4 && residual <= 1e-5);
        }
    }
    Ok(())
}

fn run_linearize(config: &ExperimentConfig, s: &mut RunSummary) -> Result<()> {
    let u0 = config.profile("initial", &config.initial)?;
    let v0 = config.variation_profile()?;
    let snaps = evolve(&VariationState::new(u0, v0)?, &config.flow_config(), false)?;
    let mut table = CsvTable::new(&["t", "v_sup", "zeros", "min_margin", "multiple_zero", "v1_abs"]);
    let mut counts = Vec::with_capacity(snaps.len());
    for st in &snaps {
        let zc = count_transverse_zeros(&st.v, config.theta)?;
        let margin = if zc.count == 0 { 0.0 } else { zc.min_margin() };
        table.push(vec![
            st.time.into(),
            st.v.sup_norm().into(),
            zc.count.into(),
            margin.into(),
            zc.multiple_zero_flag.into(),
            fourier_coefficients(&st.v).get(1).norm().into(),
        ]);
        counts.push(zc.count);
    }
    s.write_csv("variation.csv", &table)?;
    s.write_json("final_state.json", snaps.last().unwrap())?;
    s.scalar("initial_zeros", counts[0] as f64);
    s.scalar("final_zeros", *counts.last().unwrap() as f64);
    s.flag("zero_count_nonincreasing", 7, counts.windows(2).all(|w| w[1] <= w[0]));
    Ok(())
}

fn run_w2(config: &ExperimentConfig, s: &mut RunSummary) -> Result<()> {
    let u0 = config.profile("initial", &config.initial)?;
    let v0 = config.variation_profile()?;
    let cfg = config.flow_config();
    let snaps = evolve(&VariationState::new(u0.clone(), v0.clone())?, &cfg, true)?;
    let mut table = CsvTable::new(&["t", "v_sup", "w2_sup", "d2_sup"]);
    for st in &snaps {
        let sup = |p: &Option<PeriodicProfile>| p.as_ref().map_or(0.0, |p| p.sup_norm());
        table.push(vec![st.time.into(), st.v.sup_norm().into(), sup(&st.w2).into(), sup(&st.d2).into()]);
    }
    s.write_csv("w2.csv", &table)?;
    s.write_json("final_state.json", snaps.last().unwrap())?;
    let (first, second) = oracle_mismatches(&u0, &v0, config.epsilon, &cfg)?;
    let (r1, r2) = (first[0] / first[1], second[0] / second[1]);
    s.scalar("v_mismatch", first[0]);
    s.scalar("v_mismatch_half", first[1]);
    s.scalar("w2_mismatch", second[0]);
    s.scalar("w2_mismatch_half", second[1]);
    s.scalar("v_ratio", r1);
    s.scalar("w2_ratio", r2);
    s.flag("oracle_consistency", 13, halving_ratio_ok(r1) && halving_ratio_ok(r2));
    Ok(())
}

const SPECTRUM_MODES: i64 = 8;

fn run_spectrum(config: &ExperimentConfig, s: &mut RunSummary) -> Result<()> {
    let u0 = config.profile("initial", &config.initial)?;
    let v0 = config.variation_profile()?;
    let cfg = config.flow_config();
    let snaps = evolve(&VariationState::new(u0.clone(), v0.clone())?, &cfg, false)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..=SPECTRUM_MODES).map(|n| format!("abs_c{n}")));
    let mut table = CsvTable::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    let spectra: Vec<_> = snaps.iter().map(|st| (st.time, fourier_coefficients(&st.v))).collect();
    for (t, sp) in &spectra {
        let mut row: Vec<Cell> = vec![(*t).into()];
        row.extend((0..=SPECTRUM_MODES).map(|n| sp.get(n).norm().into()));
        table.push(row);
    }
    s.write_csv("spectrum.csv", &table)?;

    if check_p2_p3(&v0, config.theta) {
        let log: Vec<_> = snaps.iter().map(|st| (st.time, linearized_coefficients(&st.base))).collect();
        let cert = measure_coefficient_decay(&log, Some(&v0))?;
        s.scalar("epsilon6", cert.epsilon6);
        s.scalar("C", cert.c);
        s.scalar("v1_floor", cert.v1_floor);
        s.write_json("certificate.json", &cert)?;
        s.flag("v1_floor", 8, v1_floor_check(&spectra, &cert)?);
        let (ok, worst) = verify_linear_growth(&v0, 32)?;
        s.scalar("linear_growth_worst_ratio", worst);
        s.flag("linear_growth", 9, ok);
    }
    let v_ode = solve_truncated_ode(&u0, &truncate(&fourier_coefficients(&v0), config.n_cut), config.n_cut, &cfg)?;
    let v_pde = &spectra.last().unwrap().1;
    let rel = v_ode.l2_distance(v_pde) / v_pde.l2_norm();
    s.scalar("ode_pde_relative_error", rel);
    s.write_json("ode_spectrum.json", &v_ode)?;
    if ck_norm(&u0, 4)? <= 0.05 {
        s.flag("ode_pde_equivalence", 10, rel <= 1e-3);
    }
    Ok(())
}

fn run_family(config: &ExperimentConfig, s: &mut RunSummary) -> Result<()> {
    let mut times = config.family_times.clone();
    times.push(config.t_end);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.retain(|t| *t <= config.t_end);
    let snaps = acceptance::family_snapshots(&config.family, &config.chart, &times)?;
    let mut pairs = CsvTable::new(&["t", "a_tau", "a_eta", "b_tau", "b_eta", "count", "min_margin", "multiple"]);
    let mut fits = CsvTable::new(&["t", "i_tau", "i_eta", "a_fit", "b_fit", "residual"]);
    let mut counts_two = true;
    let mut margins_hold = true;
    let mut spp_ok = true;
    let mut initial_margin = None;
    for fam in &snaps {
        let rep = intersection_report(fam, config.theta)?;
        let m0 = *initial_margin.get_or_insert(rep.min_margin);
        counts_two &= rep.all_counts_equal(2);
        margins_hold &= rep.min_margin >= 0.25 * m0;
        spp_ok &= spp_local_check(fam, config.theta).passed();
        for p in &rep.pairs {
            pairs.push(vec![
                fam.time.into(),
                p.a.0.into(),
                p.a.1.into(),
                p.b.0.into(),
                p.b.1.into(),
                p.count.into(),
                p.min_margin.into(),
                p.multiple.into(),
            ]);
        }
        for idx in fam.indices() {
            let f = fit_great_circle(fam.get(idx));
            fits.push(vec![
                fam.time.into(),
                idx.0.into(),
                idx.1.into(),
                f.a.into(),
                f.b.into(),
                f.residual_sup.into(),
            ]);
        }
        s.scalar(&format!("min_margin_t{}", fam.time), rep.min_margin);
    }
    s.write_csv("family.csv", &pairs)?;
    s.write_csv("fits.csv", &fits)?;
    let sep = acceptance::limit_separation(&snaps[0], snaps.last().unwrap());
    s.scalar("min_intersection_margin", initial_margin.unwrap_or(0.0));
    if sep.is_finite() {
        s.scalar("min_limit_separation", sep);
    }
    s.flag("counts_two", 11, counts_two);
    s.flag("margin_persistence", 11, margins_hold);
    s.flag("spp_local", 11, spp_ok);
    s.flag("distinct_limits", 11, sep >= 1e-3);
    Ok(())
}

fn run_homotopy(config: &ExperimentConfig, s: &mut RunSummary) -> Result<()> {
    let h0 = config.profile("initial", &config.initial)?;
    let traj = flow(&h0, &config.flow_config())?;
    let residual = fit_great_circle(traj.last()).residual_sup;
    s.scalar("final_residual", residual);
    let rc = reparam_check(&traj, config.distance_order, config.s_points)?;
    let mut table = CsvTable::new(&["s", "d", "rho", "beta", "log_gap"]);
    for &(sv, d) in &rc.distances {
        let r = &rc.reparam;
        table.push(vec![sv.into(), d.into(), r.rho(sv).into(), r.beta(sv).into(), r.log_gap(sv).into()]);
    }
    s.write_csv("homotopy.csv", &table)?;
    s.scalar("rho0", rc.reparam.rho0());
    s.scalar("rho_knots", rc.reparam.rho_knots.len() as f64);
    s.flag("beta_endpoints", 12, rc.endpoints);
    s.flag("beta_strictly_increasing", 12, rc.strictly_increasing);
    s.flag("flatness", 12, rc.flat);
    Ok(())
}

fn run_acceptance(config: &ExperimentConfig, s: &mut RunSummary) -> Result<()> {
    let ids: Vec<usize> = if config.criteria.is_empty() {
        (1..=13).collect()
    } else {
        config.criteria.clone()
    };
    let mut table = CsvTable::new(&["id", "name", "passed", "seconds", "detail"]);
    for id in ids {
        let r = acceptance::run(id, config.seed);
        table.push(vec![
            id.into(),
            r.name.into(),
            r.passed.into(),
            r.seconds.into(),
            r.detail.replace(',', ";").into(),
        ]);
        s.flag(r.name, id, r.passed);
    }
    s.write_csv("acceptance.csv", &table)?;
    Ok(())
}

pub const PLOT_FILE: &str = "plot_data.csv";

/// `(artifact, abscissa column, series columns)` used for the plot bundle.
fn plot_source(kind: Kind) -> (&'static str, &'static str, Vec<String>) {
    let cols = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    match kind {
        Kind::Flow => ("trajectory.csv", "t", cols(&["kappa_sup", "length", "defect"])),
        Kind::Linearize => ("variation.csv", "t", cols(&["v_sup", "zeros", "v1_abs"])),
        Kind::W2 => ("w2.csv", "t", cols(&["v_sup", "w2_sup", "d2_sup"])),
        Kind::Spectrum => ("spectrum.csv", "t", (0..=SPECTRUM_MODES).map(|n| format!("abs_c{n}")).collect()),
        Kind::Family => ("fits.csv", "t", cols(&["residual"])),
        Kind::Homotopy => ("homotopy.csv", "s", cols(&["d", "beta", "rho"])),
        Kind::Acceptance => ("acceptance.csv", "id", cols(&["seconds"])),
    }
}

/// Writes `plot_data.csv` with long-format rows `(series, t, value)`.
pub fn emit_plot_data(summary: &RunSummary) -> Result<PathBuf> {
    let (file, xcol, series) = plot_source(summary.kind);
    let path = summary.out_dir.join(file);
    if !path.exists() {
        return Err(CsfError::MissingArtifact(path.display().to_string()));
    }
    let (header, rows) = read_csv(&path)?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsfError::MissingArtifact(format!("column {name} in {}", path.display())))
    };
    let xi = col(xcol)?;
    let mut out = CsvTable::new(&["series", "t", "value"]);
    for name in &series {
        let ci = col(name)?;
        for r in &rows {
            out.push(vec![name.as_str().into(), r[xi].clone().into(), r[ci].clone().into()]);
        }
    }
    let target = summary.out_dir.join(PLOT_FILE);
    out.write(&target)?;
    Ok(target)
}

/// Reads a config file, applying `--out` and `--seed` overrides.
pub fn load_config(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CsfError::InvalidConfig(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    if let Some(sd) = seed {
        cfg.seed = sd;
    }
    Ok(cfg)
}
