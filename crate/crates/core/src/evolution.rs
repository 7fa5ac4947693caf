//! IMEX time stepping: explicit conservative advection of `u` along `grad v`,
//! implicit diffusion for all three components.
//!
//! One step of size `dt` performs
//!
//! ```text
//! u* = u - dt div(u grad v)                      (upwind face fluxes)
//! (1 - dt Lap) u'               = u*
//! (1 - dt d2 Lap) w'            = e^{-l2 dt} w + dt psi(l2 dt) u'
//! (1 - dt d1 Lap) v'            = e^{-l1 dt} v + dt psi(l1 dt) w'
//! ```
//!
//! with `psi(x) = (1 - e^{-x}) / x`. The decay is integrated exactly, so the
//! total mass of `w` follows `M_w' = -l2 M_w + M_u` without time error.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::elliptic::{apply_laplacian4, flux_divergence, v_time_derivative, Closure, HelmholtzSolver};
use crate::error::{Error, Result};
use crate::functionals::diagnostics;
use crate::model::{Diagnostics, Field, Params, RadialGrid, State};

/// Face value of `u` in the advective flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    /// Donor-cell value; keeps `u` nonnegative under the step limit.
    #[default]
    Upwind,
    /// Arithmetic mean of the two neighbours.
    Central,
    /// No chemotactic drift.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub dt: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub clip_negatives: bool,
    pub advection: AdvectionScheme,
    /// A step limit below this value aborts the run.
    pub dt_min: f64,
    /// Keep the full state at every record.
    pub keep_states: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            cfl_safety: 0.5,
            t_end: 10.0,
            snapshot_every: 50,
            clip_negatives: true,
            advection: AdvectionScheme::Upwind,
            dt_min: 1e-9,
            keep_states: false,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidArgument(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidArgument("snapshot_every must be >= 1".into()));
        }
        if !(self.dt_min.is_finite() && self.dt_min >= 0.0) {
            return Err(Error::InvalidArgument(format!("dt_min must be >= 0, got {}", self.dt_min)));
        }
        Ok(())
    }
}

/// `(1 - e^{-x}) / x`, continuous at 0.
fn psi(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Face slopes `(v_{i+1} - v_i) / h`.
fn face_slopes(v: &Field) -> Vec<f64> {
    let h = v.grid().spacing();
    v.values().windows(2).map(|w| (w[1] - w[0]) / h).collect()
}

/// Largest stable advective step for the drift `v`: the smaller of
/// `h / max|v'|` and the donor-cell positivity bound `min_i V_i / outflow_i`.
pub fn advective_limit(v: &Field) -> f64 {
    let grid = v.grid();
    let n = grid.len();
    let h = grid.spacing();
    let a = grid.face_areas();
    let vol = grid.weights();
    let c = face_slopes(v);
    let cmax = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if cmax == 0.0 {
        return f64::INFINITY;
    }
    let mut limit = h / cmax;
    for i in 0..n {
        let right = if i + 1 < n { a[i] * c[i].max(0.0) } else { 0.0 };
        let left = if i > 0 { a[i - 1] * (-c[i - 1]).max(0.0) } else { 0.0 };
        let out = right + left;
        if out > 0.0 {
            limit = limit.min(vol[i] / out);
        }
    }
    limit
}

/// `div(u grad v)` in flux form; zero-flux boundary faces.
pub fn advection_divergence(u: &Field, v: &Field, scheme: AdvectionScheme) -> Vec<f64> {
    let grid = u.grid();
    if scheme == AdvectionScheme::Off {
        return vec![0.0; grid.len()];
    }
    let x = u.values();
    let flux: Vec<f64> = face_slopes(v)
        .iter()
        .zip(grid.face_areas())
        .enumerate()
        .map(|(i, (&c, &a))| {
            let face = match scheme {
                AdvectionScheme::Upwind => {
                    if c >= 0.0 {
                        x[i]
                    } else {
                        x[i + 1]
                    }
                }
                _ => 0.5 * (x[i] + x[i + 1]),
            };
            a * c * face
        })
        .collect();
    flux_divergence(grid, &flux)
}

/// Implicit solvers for one step size.
#[derive(Debug, Clone)]
struct Implicit {
    dt: f64,
    u: HelmholtzSolver,
    v: HelmholtzSolver,
    w: HelmholtzSolver,
}

impl Implicit {
    fn new(grid: &Arc<RadialGrid>, params: &Params, dt: f64) -> Result<Self> {
        Ok(Self {
            dt,
            u: HelmholtzSolver::new(grid, dt, 1.0, Closure::Neumann)?,
            v: HelmholtzSolver::new(grid, dt * params.d1, 1.0, Closure::Neumann)?,
            w: HelmholtzSolver::new(grid, dt * params.d2, 1.0, Closure::Neumann)?,
        })
    }
}

/// Result of one step before clipping.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: State,
    /// Mass removed from negative entries of `u` and `w` when clipping is on.
    pub clipped_mass: f64,
}

/// Reusable stepper that caches the implicit factorizations per step size.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: Params,
    scheme: AdvectionScheme,
    clip: bool,
    cache: Option<Implicit>,
}

impl Stepper {
    pub fn new(params: Params, scheme: AdvectionScheme, clip: bool) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            scheme,
            clip,
            cache: None,
        })
    }

    /// Advances `state` by exactly `dt`; fails if `dt` exceeds the advective limit.
    pub fn step(&mut self, state: &State, dt: f64) -> Result<StepOutcome> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let limit = match self.scheme {
            AdvectionScheme::Off => f64::INFINITY,
            _ => advective_limit(&state.v),
        };
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, limit });
        }
        let grid = state.grid();
        let reuse = matches!(&self.cache, Some(c) if c.dt == dt && Arc::ptr_eq(c.u.grid(), grid));
        if !reuse {
            self.cache = Some(Implicit::new(grid, &self.params, dt)?);
        }
        let solvers = self.cache.as_ref().expect("cache filled above");
        let p = &self.params;

        let div = advection_divergence(&state.u, &state.v, self.scheme);
        let explicit = Field::new(
            Arc::clone(grid),
            state.u.values().iter().zip(&div).map(|(u, d)| u - dt * d).collect(),
        )?;
        let mut u = solvers.u.solve(&explicit)?;
        let w_rhs = state.w.scale((-p.lambda2 * dt).exp()).axpy(dt * psi(p.lambda2 * dt), &u);
        let mut w = solvers.w.solve(&w_rhs)?;
        let v_rhs = state.v.scale((-p.lambda1 * dt).exp()).axpy(dt * psi(p.lambda1 * dt), &w);
        let v = solvers.v.solve(&v_rhs)?;

        let t = state.t + dt;
        let mut clipped_mass = 0.0;
        if self.clip {
            clipped_mass += u.clip_negatives();
            clipped_mass += w.clip_negatives();
        }
        let vt = v_time_derivative(&v, &w, p);
        let next = State { t, u, v, w, vt };
        if !next.is_finite() {
            return Err(Error::NonFinite { time: t });
        }
        Ok(StepOutcome {
            state: next,
            clipped_mass,
        })
    }
}

/// One step with upwind advection and clipping.
pub fn step(state: &State, params: &Params, dt: f64) -> Result<State> {
    Ok(Stepper::new(*params, AdvectionScheme::Upwind, true)?
        .step(state, dt)?
        .state)
}

/// Diagnostics at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub diagnostics: Diagnostics,
}

/// Outer radius and node count of the mesh a series was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridDigest {
    pub r_max: f64,
    pub n: usize,
}

/// Why a run stopped before `t_end`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub time: f64,
    pub message: String,
    /// The step produced non-finite values or the step size collapsed.
    pub nonfinite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct RunMetadata {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub steps: usize,
    pub clipped_mass: f64,
    pub min_dt: f64,
    pub final_time: f64,
    pub failure: Option<RunFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub params: Params,
    pub grid: GridDigest,
    pub records: Vec<Record>,
    /// States at the record times when `keep_states` is set, otherwise empty.
    pub states: Vec<State>,
    /// Last state reached.
    pub final_state: State,
    pub meta: RunMetadata,
}

impl TimeSeries {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn aborted(&self) -> bool {
        self.meta.failure.is_some()
    }
}

/// Integrates from `(u0, v0, w0)` at `t = 0` to `cfg.t_end`.
///
/// Records are taken at `t = 0`, every `snapshot_every` steps and at the
/// final time. A failing step ends the run; the failure is stored in the
/// metadata and the records gathered so far are returned.
pub fn run(u0: &Field, v0: &Field, w0: &Field, params: &Params, cfg: &StepperConfig) -> Result<TimeSeries> {
    cfg.validate()?;
    params.validate()?;
    u0.check_nonnegative()?;
    w0.check_nonnegative()?;
    if !(u0.is_finite() && v0.is_finite() && w0.is_finite()) {
        return Err(Error::NonFinite { time: 0.0 });
    }
    let mut state = State::new(0.0, u0.clone(), v0.clone(), w0.clone(), params)?;
    let grid = state.grid().clone();
    let mut stepper = Stepper::new(*params, cfg.advection, cfg.clip_negatives)?;
    let mut records = vec![Record {
        t: 0.0,
        diagnostics: diagnostics(&state, params)?,
    }];
    let mut states = Vec::new();
    if cfg.keep_states {
        states.push(state.clone());
    }
    let mut meta = RunMetadata {
        min_dt: f64::INFINITY,
        ..Default::default()
    };
    let tol = 1e-12 * cfg.t_end.max(1.0);
    let mut since_record = 0usize;
    while cfg.t_end - state.t > tol {
        let limit = match cfg.advection {
            AdvectionScheme::Off => f64::INFINITY,
            _ => cfg.cfl_safety * advective_limit(&state.v),
        };
        let mut dt = cfg.dt.min(limit);
        if dt < cfg.dt_min {
            meta.failure = Some(RunFailure {
                time: state.t,
                message: Error::DtCollapse { dt, time: state.t }.to_string(),
                nonfinite: true,
            });
            break;
        }
        let remaining = cfg.t_end - state.t;
        if dt >= remaining - tol {
            dt = remaining;
        }
        match stepper.step(&state, dt) {
            Ok(out) => {
                state = out.state;
                meta.clipped_mass += out.clipped_mass;
            }
            Err(e) => {
                meta.failure = Some(RunFailure {
                    time: state.t + dt,
                    nonfinite: matches!(e, Error::NonFinite { .. }),
                    message: e.to_string(),
                });
                break;
            }
        }
        meta.steps += 1;
        meta.min_dt = meta.min_dt.min(dt);
        since_record += 1;
        let last = cfg.t_end - state.t <= tol;
        if since_record == cfg.snapshot_every || last {
            since_record = 0;
            let d = match diagnostics(&state, params) {
                Ok(d) => d,
                Err(e) => {
                    meta.failure = Some(RunFailure {
                        time: state.t,
                        nonfinite: false,
                        message: e.to_string(),
                    });
                    break;
                }
            };
            records.push(Record { t: state.t, diagnostics: d });
            if cfg.keep_states {
                states.push(state.clone());
            }
        }
    }
    if meta.steps == 0 {
        meta.min_dt = 0.0;
    }
    meta.final_time = state.t;
    Ok(TimeSeries {
        params: *params,
        grid: GridDigest {
            r_max: grid.r_max(),
            n: grid.len(),
        },
        records,
        states,
        final_state: state,
        meta,
    })
}

/// Qualitative long-time behaviour of `sup u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Bounded,
    Growing,
    AbortedNonfinite,
    /// Neither criterion applies.
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Bounded => "bounded",
            Verdict::Growing => "growing",
            Verdict::AbortedNonfinite => "aborted-nonfinite",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupReport {
    pub verdict: Verdict,
    /// `max sup u / sup u(0)`.
    pub peak_growth: f64,
    /// Largest `sup u |B_h| / ||u||_1` over the records, with `|B_h|` the
    /// volume of the ball of radius one mesh spacing.
    pub concentration: f64,
}

/// Concentration above which the mass is taken to have collapsed below the
/// mesh resolution.
pub const COLLAPSE_CONCENTRATION: f64 = 0.5;

/// Minimum record count for [`blowup_indicator`].
pub const BLOWUP_MIN_RECORDS: usize = 8;

/// Classifies a run by its `sup u` trace.
///
/// Aborted runs are `aborted-nonfinite`. A run is `growing` when half its mass
/// or more fits in a ball of one mesh spacing at some record, or when `sup u` rises
/// monotonically over the last quarter of the records and ends at least ten
/// times above its minimum; `bounded` when the maximum over the second half is
/// at most twice the median of the first half.
pub fn blowup_indicator(series: &TimeSeries) -> Result<BlowupReport> {
    let n = series.records.len();
    if n < BLOWUP_MIN_RECORDS {
        return Err(Error::SeriesTooShort {
            got: n,
            need: BLOWUP_MIN_RECORDS,
        });
    }
    let sup: Vec<f64> = series.records.iter().map(|r| r.diagnostics.sup_u).collect();
    let peak = sup.iter().copied().fold(0.0, f64::max);
    let peak_growth = if sup[0] > 0.0 { peak / sup[0] } else if peak > 0.0 { f64::INFINITY } else { 1.0 };
    let h = series.grid.r_max / (series.grid.n.max(2) - 1) as f64;
    let ball = 0.5 * PI * PI * h.powi(4);
    let concentration = series
        .records
        .iter()
        .map(|r| {
            let d = &r.diagnostics;
            if d.mass_u > 0.0 {
                d.sup_u * ball / d.mass_u
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let report = |verdict| BlowupReport {
        verdict,
        peak_growth,
        concentration,
    };
    if series.meta.failure.as_ref().is_some_and(|f| f.nonfinite) {
        return Ok(report(Verdict::AbortedNonfinite));
    }
    if concentration >= COLLAPSE_CONCENTRATION {
        return Ok(report(Verdict::Growing));
    }
    let tail = &sup[n - n.div_ceil(4)..];
    let min = sup.iter().copied().fold(f64::INFINITY, f64::min);
    let monotone = tail.windows(2).all(|w| w[1] >= w[0]) && tail.first() < tail.last();
    if monotone && *tail.last().unwrap() >= 10.0 * min {
        return Ok(report(Verdict::Growing));
    }
    let mut first: Vec<f64> = sup[..n / 2].to_vec();
    first.sort_by(f64::total_cmp);
    let median = if first.len() % 2 == 1 {
        first[first.len() / 2]
    } else {
        0.5 * (first[first.len() / 2 - 1] + first[first.len() / 2])
    };
    let late_max = sup[n / 2..].iter().copied().fold(0.0, f64::max);
    if late_max <= 2.0 * median {
        return Ok(report(Verdict::Bounded));
    }
    Ok(report(Verdict::Inconclusive))
}

/// Residual `||vt - (d1 Lap v - l1 v + w)||_2` relative to the size of the terms.
pub fn vt_consistency(state: &State, params: &Params) -> f64 {
    let lv = apply_laplacian4(&state.v);
    let expect = v_time_derivative(&state.v, &state.w, params);
    let diff = state.vt.sub(&expect);
    let scale = state.w.inner(&state.w).sqrt()
        + params.lambda1 * state.v.inner(&state.v).sqrt()
        + params.d1 * lv.inner(&lv).sqrt();
    diff.inner(&diff).sqrt() / scale.max(f64::MIN_POSITIVE)
}
