//! Experiment drivers. Each writes its files into the configured output
//! directory and returns an [`ExitReport`].

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use chemo4d::elliptic::helmholtz_solve;
use chemo4d::functionals::{
    bound_l_inequality_fit, constant_identity, hls_check, identity_residual_to_date, minimization_gap,
    modified_sobolev_check, sobolev_check, truncation_subinequalities, truncation_tail_literal, BoundLFit,
};
use chemo4d::picard::PicardResult;
use chemo4d::{
    blowup_indicator, build_grid, gaussian_bump, picard_iterate, run, BlowupReport, Exponents, Field,
    InequalityReport, MildData, MildSolver, Params, RadialGrid, StepperConfig, TimeSeries,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ScenarioConfig, SignalInit};
use crate::error::{CliError, CliResult, ErrorRecord};
use crate::output::{fmt_f64, write_csv, write_json, SCHEMA_VERSION};

/// Columns of `series.csv`.
pub const SERIES_HEADER: [&str; 9] = [
    "t", "mass_u", "entropy", "F_lyap", "D_diss", "L_energy", "D1_diss", "sup_u", "residual",
];

/// Columns of `sweep.csv`.
pub const SWEEP_HEADER: [&str; 16] = [
    "mass",
    "bounded_fraction",
    "marker",
    "verdict",
    "peak_growth",
    "concentration",
    "final_sup_u",
    "max_L",
    "c1_hat",
    "c2_hat",
    "violation_fraction",
    "fit_conforming",
    "steps",
    "final_time",
    "width",
    "error",
];

/// Columns of `inequalities.csv`.
pub const SUITE_HEADER: [&str; 11] = [
    "witness", "check", "parameter", "lhs", "rhs", "margin", "slack", "passed", "gating", "seed", "bumps",
];

/// Modified Sobolev parameters exercised by the suite.
pub const SUITE_EPS: [f64; 3] = [0.1, 1.0, 10.0];
/// Truncation levels exercised by the suite.
pub const SUITE_LEVELS: [f64; 3] = [1.0, 4.0, 16.0];

/// Outcome of an experiment.
#[derive(Debug, Clone)]
pub struct ExitReport {
    pub experiment: Experiment,
    pub config_hash: String,
    pub files: Vec<PathBuf>,
    /// Every gated check passed.
    pub passed: bool,
    /// A run stopped early; the files hold what was computed.
    pub partial: bool,
    pub summary: Value,
}

impl ExitReport {
    pub fn success(&self) -> bool {
        self.passed && !self.partial
    }
}

/// Gaussian bump `u0` of the given mass (zero for mass 0) and the matching
/// `v0, w0`.
pub fn initial_data(cfg: &ScenarioConfig, grid: &Arc<RadialGrid>, mass: f64) -> CliResult<(Field, Field, Field)> {
    let u0 = if mass == 0.0 {
        Field::zeros(grid)
    } else {
        gaussian_bump(cfg.initial.width, mass, grid)?
    };
    let p = &cfg.params;
    let (v0, w0) = match cfg.initial.signal {
        SignalInit::Zero => (Field::zeros(grid), Field::zeros(grid)),
        SignalInit::QuasiSteady => {
            let w0 = helmholtz_solve(&u0, p.d2, p.lambda2)?;
            let v0 = helmholtz_solve(&w0, p.d1, p.lambda1)?;
            (v0, w0)
        }
    };
    Ok((u0, v0, w0))
}

/// Integrates the scenario with the initial mass replaced by `mass`.
pub fn simulate(cfg: &ScenarioConfig, mass: f64) -> CliResult<TimeSeries> {
    let grid = build_grid(cfg.grid.r_max, cfg.grid.n)?;
    let (u0, v0, w0) = initial_data(cfg, &grid, mass)?;
    let mut series = run(&u0, &v0, &w0, &cfg.params, &cfg.stepper)?;
    series.meta.seed = Some(cfg.seed);
    series.meta.config_hash = Some(cfg.hash());
    Ok(series)
}

pub fn series_rows(series: &TimeSeries) -> Vec<Vec<String>> {
    let residual = identity_residual_to_date(&series.records);
    series
        .records
        .iter()
        .zip(residual)
        .map(|(r, res)| {
            let d = &r.diagnostics;
            [r.t, d.mass_u, d.entropy, d.f_lyap, d.d_diss, d.l_energy, d.d1_diss, d.sup_u, res]
                .iter()
                .map(|&x| fmt_f64(x))
                .collect()
        })
        .collect()
}

fn write_error(dir: &Path, record: &ErrorRecord) -> CliResult<PathBuf> {
    write_json(dir, "error.json", record)
}

fn relative_mass_drift(series: &TimeSeries) -> f64 {
    let first = series.records.first().map_or(0.0, |r| r.diagnostics.mass_u);
    let drift = series
        .records
        .iter()
        .map(|r| (r.diagnostics.mass_u - first).abs())
        .fold(0.0, f64::max);
    if first > 0.0 {
        drift / first
    } else {
        drift
    }
}

/// Integrates one scenario; writes `series.csv` and `summary.json`, plus
/// `error.json` when the run stopped early.
pub fn single_run(cfg: &ScenarioConfig) -> CliResult<ExitReport> {
    let start = Instant::now();
    let hash = cfg.hash();
    let thresholds = cfg.params.thresholds();
    let mass = cfg.initial.resolved_mass(&thresholds);
    let series = simulate(cfg, mass)?;
    let dir = &cfg.output_dir;
    let mut files = vec![write_csv(dir, "series.csv", &SERIES_HEADER, &series_rows(&series))?];

    let residual = identity_residual_to_date(&series.records);
    let max_residual = residual.iter().fold(0.0, |a: f64, r| a.max(r.abs()));
    let verdict = blowup_indicator(&series);
    let fit = bound_l_inequality_fit(&series);
    let partial = series.aborted();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": Experiment::SingleRun.as_str(),
        "config_hash": hash,
        "seed": cfg.seed,
        "partial": partial,
        "thresholds": thresholds,
        "initial": { "mass": mass, "width": cfg.initial.width, "signal": cfg.initial.signal },
        "run": {
            "records": series.records.len(),
            "steps": series.meta.steps,
            "final_time": series.meta.final_time,
            "min_dt": series.meta.min_dt,
            "clipped_mass": series.meta.clipped_mass,
            "failure": series.meta.failure,
            "relative_mass_drift": relative_mass_drift(&series),
            "max_abs_residual": max_residual,
        },
        "verdict": verdict.as_ref().ok().map(|v| v.verdict),
        "peak_growth": verdict.as_ref().ok().map(|v| v.peak_growth),
        "concentration": verdict.as_ref().ok().map(|v| v.concentration),
        "verdict_note": verdict.as_ref().err().map(|e| e.to_string()),
        "fit": fit.as_ref().ok(),
        "fit_note": fit.as_ref().err().map(|e| e.to_string()),
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    files.push(write_json(dir, "summary.json", &summary)?);
    if let Some(failure) = &series.meta.failure {
        let record = ErrorRecord {
            schema_version: SCHEMA_VERSION,
            kind: "partial_run".into(),
            message: format!("run stopped at t = {}: {}", failure.time, failure.message),
            experiment: Some(Experiment::SingleRun.as_str().into()),
            config_hash: Some(hash.clone()),
        };
        files.push(write_error(dir, &record)?);
    }
    Ok(ExitReport {
        experiment: Experiment::SingleRun,
        config_hash: hash,
        files,
        passed: true,
        partial,
        summary,
    })
}

/// One mass of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub mass: f64,
    pub bounded_fraction: f64,
    /// `below_m_bounded`, `below_m_global` or `above_m_global`.
    pub marker: &'static str,
    pub blowup: Option<BlowupReport>,
    pub final_sup_u: Option<f64>,
    pub max_l: Option<f64>,
    pub fit: Option<BoundLFit>,
    pub steps: Option<usize>,
    pub final_time: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn verdict(&self) -> Option<&'static str> {
        self.blowup.map(|b| b.verdict.as_str())
    }

    fn cells(&self, width: f64) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        vec![
            fmt_f64(self.mass),
            fmt_f64(self.bounded_fraction),
            self.marker.into(),
            self.verdict().unwrap_or_default().into(),
            opt(self.blowup.map(|b| b.peak_growth)),
            opt(self.blowup.map(|b| b.concentration)),
            opt(self.final_sup_u),
            opt(self.max_l),
            opt(self.fit.map(|f| f.c1_hat)),
            opt(self.fit.map(|f| f.c2_hat)),
            opt(self.fit.map(|f| f.violation_fraction)),
            self.fit.map(|f| f.conforming.to_string()).unwrap_or_default(),
            self.steps.map(|s| s.to_string()).unwrap_or_default(),
            opt(self.final_time),
            fmt_f64(width),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

pub fn mass_marker(mass: f64, params: &Params) -> &'static str {
    let th = params.thresholds();
    if mass < th.m_bounded {
        "below_m_bounded"
    } else if mass < th.m_global {
        "below_m_global"
    } else {
        "above_m_global"
    }
}

fn sweep_row(cfg: &ScenarioConfig, mass: f64) -> SweepRow {
    let th = cfg.params.thresholds();
    let mut row = SweepRow {
        mass,
        bounded_fraction: mass / th.m_bounded,
        marker: mass_marker(mass, &cfg.params),
        blowup: None,
        final_sup_u: None,
        max_l: None,
        fit: None,
        steps: None,
        final_time: None,
        error: None,
    };
    let series = match simulate(cfg, mass) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.final_sup_u = series.records.last().map(|r| r.diagnostics.sup_u);
    row.max_l = series.records.iter().map(|r| r.diagnostics.l_energy).reduce(f64::max);
    row.steps = Some(series.meta.steps);
    row.final_time = Some(series.meta.final_time);
    let mut notes = Vec::new();
    if let Some(f) = &series.meta.failure {
        notes.push(format!("stopped at t = {}: {}", f.time, f.message));
    }
    match blowup_indicator(&series) {
        Ok(b) => row.blowup = Some(b),
        Err(e) => notes.push(e.to_string()),
    }
    match bound_l_inequality_fit(&series) {
        Ok(f) => row.fit = Some(f),
        Err(e) => notes.push(format!("fit: {e}")),
    }
    if !notes.is_empty() {
        row.error = Some(notes.join("; "));
    }
    row
}

/// Runs every mass in the work pool; row order follows `masses`. A failing
/// row carries its error and does not affect the others.
pub fn mass_sweep_table(cfg: &ScenarioConfig, masses: &[f64]) -> CliResult<Vec<SweepRow>> {
    for &m in masses {
        if !(m.is_finite() && m > 0.0) {
            return Err(CliError::Config(format!("sweep masses must be positive, got {m}")));
        }
    }
    if masses.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::Config("sweep masses must be sorted ascending".into()));
    }
    Ok(masses.par_iter().map(|&m| sweep_row(cfg, m)).collect())
}

/// Writes `sweep.csv` and `summary.json`. Fails the report when a mass below
/// the boundedness threshold is not judged bounded.
pub fn mass_sweep(cfg: &ScenarioConfig, masses: &[f64]) -> CliResult<ExitReport> {
    let start = Instant::now();
    let hash = cfg.hash();
    let rows = mass_sweep_table(cfg, masses)?;
    let dir = &cfg.output_dir;
    let cells: Vec<Vec<String>> = rows.iter().map(|r| r.cells(cfg.initial.width)).collect();
    let mut files = vec![write_csv(dir, "sweep.csv", &SWEEP_HEADER, &cells)?];
    let regime_exceptions: Vec<f64> = rows
        .iter()
        .filter(|r| r.marker == "below_m_bounded" && r.verdict() != Some("bounded"))
        .map(|r| r.mass)
        .collect();
    let passed = regime_exceptions.is_empty();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": Experiment::MassSweep.as_str(),
        "config_hash": hash,
        "seed": cfg.seed,
        "thresholds": cfg.params.thresholds(),
        "family": { "kind": "gaussian_bump", "width": cfg.initial.width, "signal": cfg.initial.signal },
        "grid": cfg.grid,
        "stepper": cfg.stepper,
        "verdicts": rows.iter().map(|r| r.verdict()).collect::<Vec<_>>(),
        "rows": rows,
        "regime_exceptions": regime_exceptions,
        "passed": passed,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    files.push(write_json(dir, "summary.json", &summary)?);
    Ok(ExitReport {
        experiment: Experiment::MassSweep,
        config_hash: hash,
        files,
        passed,
        partial: false,
        summary,
    })
}

/// One (witness, check) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    /// `None` for witness-free rows.
    pub witness: Option<usize>,
    pub check: String,
    pub parameter: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub slack: f64,
    pub passed: bool,
    /// Counted towards the exit status.
    pub gating: bool,
    pub seed: Option<u64>,
    pub bumps: String,
}

impl SuiteRow {
    fn from_report(r: InequalityReport, witness: Option<usize>, parameter: Option<f64>, gating: bool) -> Self {
        Self {
            witness,
            check: r.name,
            parameter,
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            slack: r.slack,
            passed: r.passed,
            gating,
            seed: None,
            bumps: String::new(),
        }
    }

    pub fn failed(&self) -> bool {
        self.gating && !self.passed
    }

    fn cells(&self) -> Vec<String> {
        vec![
            self.witness.map(|w| w.to_string()).unwrap_or_default(),
            self.check.clone(),
            self.parameter.map(fmt_f64).unwrap_or_default(),
            fmt_f64(self.lhs),
            fmt_f64(self.rhs),
            fmt_f64(self.margin),
            fmt_f64(self.slack),
            self.passed.to_string(),
            self.gating.to_string(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.bumps.clone(),
        ]
    }
}

/// Mixture of 1 to 4 Gaussian bumps with log-uniform widths in `[0.2, 4]` and
/// masses in `[1, 500]`; returns the field and a `width:mass` description.
pub fn random_witness(rng: &mut impl Rng, grid: &Arc<RadialGrid>) -> CliResult<(Field, String)> {
    let log_uniform = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| {
        (lo.ln() + (hi.ln() - lo.ln()) * rng.gen::<f64>()).exp()
    };
    let k = rng.gen_range(1..=4);
    let mut f = Field::zeros(grid);
    let mut parts = Vec::with_capacity(k);
    for _ in 0..k {
        let width = log_uniform(rng, 0.2, 4.0);
        let mass = log_uniform(rng, 1.0, 500.0);
        f = f.add(&gaussian_bump(width, mass, grid)?);
        parts.push(format!("{}:{}", fmt_f64(width), fmt_f64(mass)));
    }
    Ok((f, parts.join(";")))
}

fn witness_rows(index: usize, seed: u64, params: &Params, grid: &Arc<RadialGrid>) -> CliResult<Vec<SuiteRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (f, bumps) = random_witness(&mut rng, grid)?;
    let (probe, _) = random_witness(&mut rng, grid)?;
    let w = Some(index);
    let mut rows = vec![
        SuiteRow::from_report(hls_check(&f)?, w, None, true),
        SuiteRow::from_report(sobolev_check(&f)?, w, None, true),
    ];
    for eps in SUITE_EPS {
        rows.push(SuiteRow::from_report(modified_sobolev_check(&f, eps)?, w, Some(eps), true));
    }
    for n in SUITE_LEVELS {
        for r in truncation_subinequalities(&f, n)? {
            rows.push(SuiteRow::from_report(r, w, Some(n), true));
        }
    }
    for n in SUITE_LEVELS {
        rows.push(SuiteRow::from_report(truncation_tail_literal(&f, n)?, w, Some(n), false));
    }
    let gap = minimization_gap(&probe, &f, params)?;
    rows.push(SuiteRow::from_report(
        InequalityReport::with_slack("minimization_gap_sign", -gap.gap, 0.0, 1e-8 * gap.scale, ""),
        w,
        None,
        true,
    ));
    let identity_slack = 1e-8 * gap.scale.max(gap.quadratic_form);
    rows.push(SuiteRow::from_report(
        InequalityReport::with_slack(
            "minimization_gap_identity",
            (gap.gap - gap.quadratic_form).abs(),
            0.0,
            identity_slack,
            "",
        ),
        w,
        None,
        true,
    ));
    for row in &mut rows {
        row.seed = Some(seed);
        row.bumps.clone_from(&bumps);
    }
    Ok(rows)
}

/// Per-witness seeds drawn from one stream seeded by `seed`.
pub fn witness_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| master.gen()).collect()
}

/// The constant-identity row followed by every check on `n_witnesses`
/// random witnesses, in witness order.
pub fn inequality_suite_rows(cfg: &ScenarioConfig, n_witnesses: usize) -> CliResult<Vec<SuiteRow>> {
    if n_witnesses == 0 {
        return Err(CliError::Config("the suite needs at least one witness".into()));
    }
    let grid = build_grid(cfg.suite.r_max, cfg.suite.n)?;
    let seeds = witness_seeds(cfg.seed, n_witnesses);
    let blocks: Vec<Vec<SuiteRow>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| witness_rows(i, s, &cfg.params, &grid))
        .collect::<CliResult<_>>()?;
    let mut rows = vec![SuiteRow::from_report(constant_identity(), None, None, true)];
    rows.extend(blocks.into_iter().flatten());
    Ok(rows)
}

/// Writes `inequalities.csv` and `summary.json`; fails when any gated row
/// has a margin below its slack.
pub fn inequality_suite(cfg: &ScenarioConfig, n_witnesses: usize) -> CliResult<ExitReport> {
    let start = Instant::now();
    let hash = cfg.hash();
    let rows = inequality_suite_rows(cfg, n_witnesses)?;
    let dir = &cfg.output_dir;
    let cells: Vec<Vec<String>> = rows.iter().map(SuiteRow::cells).collect();
    let mut files = vec![write_csv(dir, "inequalities.csv", &SUITE_HEADER, &cells)?];

    let mut checks: Vec<(String, usize, usize, f64)> = Vec::new();
    for r in &rows {
        let rel = r.margin / (r.lhs.abs() + r.rhs.abs()).max(f64::MIN_POSITIVE);
        match checks.iter_mut().find(|c| c.0 == r.check) {
            Some(c) => {
                c.1 += 1;
                c.2 += usize::from(!r.passed);
                c.3 = c.3.min(rel);
            }
            None => checks.push((r.check.clone(), 1, usize::from(!r.passed), rel)),
        }
    }
    let failures = rows.iter().filter(|r| r.failed()).count();
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": Experiment::InequalitySuite.as_str(),
        "config_hash": hash,
        "seed": cfg.seed,
        "witnesses": n_witnesses,
        "grid": { "r_max": cfg.suite.r_max, "n": cfg.suite.n },
        "rows": rows.len(),
        "gated_failures": failures,
        "checks": checks.iter().map(|(name, n, fail, rel)| json!({
            "check": name,
            "rows": n,
            "failures": fail,
            "min_relative_margin": rel,
            "gating": rows.iter().find(|r| &r.check == name).is_some_and(|r| r.gating),
        })).collect::<Vec<_>>(),
        "passed": failures == 0,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    files.push(write_json(dir, "summary.json", &summary)?);
    Ok(ExitReport {
        experiment: Experiment::InequalitySuite,
        config_hash: hash,
        files,
        passed: failures == 0,
        partial: false,
        summary,
    })
}

/// Agreement of the mild fixed point with the time stepper at `t_final`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crosscheck {
    pub t_final: f64,
    pub mass: f64,
    /// Relative `L^2` differences at `t_final`.
    pub diff_u: f64,
    pub diff_v: f64,
    pub diff_w: f64,
    pub ratios: Vec<f64>,
    pub distances: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub imex_steps: usize,
}

impl Crosscheck {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// `||a - b|| / ||b||`, or `||a - b||` when `b` vanishes.
pub fn relative_l2(a: &Field, b: &Field) -> f64 {
    let diff = a.sub(b);
    let d = diff.inner(&diff).sqrt();
    let n = b.inner(b).sqrt();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

pub fn crosscheck_report(cfg: &ScenarioConfig, t_final: f64) -> CliResult<Crosscheck> {
    if !(t_final.is_finite() && t_final > 0.0 && t_final <= 0.5) {
        return Err(CliError::Config(format!("cross-check horizon must lie in (0, 0.5], got {t_final}")));
    }
    let c = &cfg.crosscheck;
    let grid = build_grid(cfg.grid.r_max, cfg.grid.n)?;
    let mass = cfg.initial.resolved_mass(&cfg.params.thresholds());
    let (u0, v0, w0) = initial_data(cfg, &grid, mass)?;
    let solver = MildSolver::new(&grid, &cfg.params, t_final, c.mesh, c.max_substep, Exponents::default())?;
    let data = MildData {
        u0: u0.clone(),
        v0: v0.clone(),
        w0: w0.clone(),
    };
    let PicardResult {
        fixed_point,
        distances,
        ratios,
        converged,
    } = picard_iterate(&solver, &data, c.k_max, c.tol)?;
    let stepper = StepperConfig {
        dt: c.imex_dt,
        t_end: t_final,
        snapshot_every: usize::MAX,
        keep_states: false,
        ..cfg.stepper
    };
    let series = run(&u0, &v0, &w0, &cfg.params, &stepper)?;
    if let Some(f) = &series.meta.failure {
        return Err(CliError::Solver(chemo4d::Error::InvalidArgument(format!(
            "comparison run stopped at t = {}: {}",
            f.time, f.message
        ))));
    }
    let last = fixed_point.len() - 1;
    let end = &series.final_state;
    Ok(Crosscheck {
        t_final,
        mass,
        diff_u: relative_l2(&end.u, &fixed_point.u[last]),
        diff_v: relative_l2(&end.v, &fixed_point.v[last]),
        diff_w: relative_l2(&end.w, &fixed_point.w[last]),
        iterations: distances.len(),
        ratios,
        distances,
        converged,
        imex_steps: series.meta.steps,
    })
}

/// Writes `summary.json` with the differences and contraction ratios.
pub fn picard_crosscheck(cfg: &ScenarioConfig, t_final: f64) -> CliResult<ExitReport> {
    let start = Instant::now();
    let hash = cfg.hash();
    let report = crosscheck_report(cfg, t_final)?;
    let contracting = report.ratios.iter().all(|&r| r < 1.0);
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": Experiment::PicardCrosscheck.as_str(),
        "config_hash": hash,
        "seed": cfg.seed,
        "grid": cfg.grid,
        "crosscheck": cfg.crosscheck,
        "result": report,
        "max_ratio": report.max_ratio(),
        "contracting": contracting,
        "passed": contracting && report.converged,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let files = vec![write_json(&cfg.output_dir, "summary.json", &summary)?];
    Ok(ExitReport {
        experiment: Experiment::PicardCrosscheck,
        config_hash: hash,
        files,
        passed: contracting && report.converged,
        partial: false,
        summary,
    })
}

/// Dispatches on `cfg.experiment`, taking masses, witness count and horizon
/// from the config.
pub fn run_scenario(cfg: &ScenarioConfig) -> CliResult<ExitReport> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::SingleRun => single_run(cfg),
        Experiment::MassSweep => {
            let masses = cfg
                .sweep
                .as_ref()
                .map(|s| s.resolved(&cfg.params.thresholds()))
                .unwrap_or_default();
            mass_sweep(cfg, &masses)
        }
        Experiment::InequalitySuite => inequality_suite(cfg, cfg.suite.witnesses),
        Experiment::PicardCrosscheck => picard_crosscheck(cfg, cfg.crosscheck.t_final),
    }
}
