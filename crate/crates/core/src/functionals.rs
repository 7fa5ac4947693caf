//! Entropy, energies, dissipations and the functional inequalities behind the
//! global existence and boundedness thresholds.
//!
//! Gradient terms are evaluated on the mesh faces, so that the discrete
//! integration-by-parts identities used by the energy method hold exactly:
//! `||grad f||^2 = -int f Lap f`, and `int |grad u|^2 / (1+u)` uses the face
//! product `(u_{i+1} - u_i)(log(1+u_{i+1}) - log(1+u_i))`, i.e. the
//! logarithmic mean of `1+u` as face weight.

use std::f64::consts::PI;

use serde::Serialize;

use crate::elliptic::{
    apply_laplacian4, biharmonic_factored_solve, face_differences, grad_l1, grad_sq,
    poisson_energy, poisson_potential, poisson_solve, radial_derivative, radial_derivative_over_r,
    v_time_derivative,
};
use crate::error::{Error, Result};
use crate::evolution::{Record, TimeSeries};
use crate::model::{lp_norm, Diagnostics, Field, Params, State, SPHERE_AREA};

/// Relative quadrature allowance for inequality reports.
pub const DEFAULT_SLACK_REL: f64 = 1e-8;

/// Sharp Hardy-Littlewood-Sobolev constant `sqrt(3/2) pi` for the kernel `|x-y|^{-2}` on R^4.
pub fn c_hls() -> f64 {
    (1.5f64).sqrt() * PI
}

/// Sharp constant `2^{1/4} / (4 sqrt(pi))` in `||f||_{4/3} <= C_S ||grad f||_1` on R^4.
pub fn c_s() -> f64 {
    2f64.powf(0.25) / (4.0 * PI.sqrt())
}

/// Outcome of evaluating `lhs <= rhs` on a witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
    pub slack: f64,
    pub witness: String,
}

impl InequalityReport {
    /// Report with the default slack `1e-8 (|lhs| + |rhs| + 1)`.
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, witness: impl Into<String>) -> Self {
        let slack = DEFAULT_SLACK_REL * (lhs.abs() + rhs.abs() + 1.0);
        Self::with_slack(name, lhs, rhs, slack, witness)
    }

    pub fn with_slack(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        slack: f64,
        witness: impl Into<String>,
    ) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin,
            passed: margin >= -slack,
            slack,
            witness: witness.into(),
        }
    }
}

/// `C_HLS C_S^2 / (4 pi^2)` against `sqrt(3) / (8 pi)^2`; an equality, so the
/// report passes when `|margin| <= 1e-14`.
pub fn constant_identity() -> InequalityReport {
    let lhs = c_hls() * c_s() * c_s() / (4.0 * PI * PI);
    let rhs = 3f64.sqrt() / (8.0 * PI).powi(2);
    let mut report = InequalityReport::with_slack("constant_identity", lhs, rhs, 1e-14, "constants");
    report.passed = report.margin.abs() <= report.slack;
    report
}

/// Radial proxy of the `W^{k,p}` norm: `||f||_p`, plus `||f'||_p`, plus
/// `||Lap f||_p + ||f'/r||_p` for `order = 2`.
pub fn sobolev_norm(f: &Field, order: u8, p: f64) -> Result<f64> {
    let base = lp_norm(f, p)?;
    match order {
        0 => Ok(base),
        1 => Ok(base + lp_norm(&radial_derivative(f), p)?),
        2 => Ok(base
            + lp_norm(&radial_derivative(f), p)?
            + lp_norm(&apply_laplacian4(f), p)?
            + lp_norm(&radial_derivative_over_r(f), p)?),
        _ => Err(Error::InvalidArgument(format!("Sobolev order must be 0, 1 or 2, got {order}"))),
    }
}

/// `int (1+u) log(1+u) dx`.
pub fn modified_entropy(u: &Field) -> Result<f64> {
    u.check_nonnegative()?;
    Ok(u.map(|x| {
        let x = x.max(0.0);
        (1.0 + x) * x.ln_1p()
    })
    .integral())
}

/// Per-face `(u_{i+1} - u_i)` and `log(1+u_{i+1}) - log(1+u_i)`, and the face
/// value of `1+u` (logarithmic mean) that links them.
struct LogFaces {
    du: Vec<f64>,
    dlog: Vec<f64>,
    one_plus_u: Vec<f64>,
}

fn log_faces(u: &Field) -> LogFaces {
    let x = u.values();
    let m = x.len() - 1;
    let mut out = LogFaces {
        du: Vec::with_capacity(m),
        dlog: Vec::with_capacity(m),
        one_plus_u: Vec::with_capacity(m),
    };
    for pair in x.windows(2) {
        let a = 1.0 + pair[0].max(0.0);
        let b = 1.0 + pair[1].max(0.0);
        let ratio = (b - a) / a;
        let dlog = ratio.ln_1p();
        let lm = if ratio.abs() < 1e-8 {
            a * (1.0 + 0.5 * ratio)
        } else {
            (b - a) / dlog
        };
        out.du.push(b - a);
        out.dlog.push(dlog);
        out.one_plus_u.push(lm);
    }
    out
}

/// Sum over faces `2 pi^2 a_{i+1/2} g_i / h` for per-face quantities `g`.
fn face_integral(u: &Field, g: impl Fn(usize) -> f64) -> f64 {
    let grid = u.grid();
    let h = grid.spacing();
    let s: f64 = grid.face_areas().iter().enumerate().map(|(i, a)| a * g(i)).sum();
    SPHERE_AREA * s / h
}

/// `int |grad u|^2 / (1+u) dx`.
pub fn fisher_information(u: &Field) -> f64 {
    let lf = log_faces(u);
    face_integral(u, |i| lf.du[i] * lf.dlog[i])
}

/// `E(v; f) = (d1 d2/2)||Lap v||^2 + ((d1 l2 + d2 l1)/2)||grad v||^2
/// + (l1 l2/2)||v||^2 - int f v`.
pub fn chemical_energy(v: &Field, f: &Field, params: &Params) -> Result<f64> {
    v.check_same_grid(f)?;
    Ok(quadratic_form(v, params) - f.inner(v))
}

fn quadratic_form(v: &Field, params: &Params) -> f64 {
    let lv = apply_laplacian4(v);
    0.5 * params.d1 * params.d2 * lv.inner(&lv)
        + 0.5 * (params.d1 * params.lambda2 + params.d2 * params.lambda1) * grad_sq(v)
        + 0.5 * params.lambda1 * params.lambda2 * v.inner(v)
}

/// Energy gap above the minimizer and the quadratic form of `v - v_u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimizationGap {
    pub gap: f64,
    pub quadratic_form: f64,
    /// `|E(v;u)| + |E(v_u;u)|`, the size against which the gap is judged.
    pub scale: f64,
}

/// `E(v;u) - E(v_u;u)` with `v_u` the minimizer, next to the quadratic form
/// it must equal.
pub fn minimization_gap(v: &Field, u: &Field, params: &Params) -> Result<MinimizationGap> {
    u.check_nonnegative()?;
    let vu = biharmonic_factored_solve(u, params)?;
    let e_v = chemical_energy(v, u, params)?;
    let e_min = chemical_energy(&vu, u, params)?;
    Ok(MinimizationGap {
        gap: e_v - e_min,
        quadratic_form: quadratic_form(&v.sub(&vu), params),
        scale: e_v.abs() + e_min.abs(),
    })
}

/// `F(u,v) = int (1+u)log(1+u) + (1/2)||v_t||^2 + E(v;u)`.
pub fn lyapunov_f(state: &State, params: &Params) -> Result<f64> {
    Ok(modified_entropy(&state.u)?
        + 0.5 * state.vt.inner(&state.vt)
        + chemical_energy(&state.v, &state.u, params)?)
}

/// The four nonnegative terms of the dissipation
/// `int u|grad(log(1+u) - v)|^2`, `int |grad(log(1+u) - v/2)|^2`,
/// `(d1+d2)||grad v_t||^2`, `(l1+l2)||v_t||^2`.
pub fn dissipation_terms(state: &State, params: &Params) -> Result<[f64; 4]> {
    state.u.check_nonnegative()?;
    let lf = log_faces(&state.u);
    let dv = face_differences(&state.v);
    let drift = face_integral(&state.u, |i| {
        let x = lf.dlog[i] - dv[i];
        (lf.one_plus_u[i] - 1.0).max(0.0) * x * x
    });
    let mixed = face_integral(&state.u, |i| {
        let x = lf.dlog[i] - 0.5 * dv[i];
        x * x
    });
    Ok([
        drift,
        mixed,
        (params.d1 + params.d2) * grad_sq(&state.vt),
        (params.lambda1 + params.lambda2) * state.vt.inner(&state.vt),
    ])
}

/// `D(u,v)`, the sum of [`dissipation_terms`].
pub fn dissipation_d(state: &State, params: &Params) -> Result<f64> {
    Ok(dissipation_terms(state, params)?.iter().sum())
}

/// `F(t) + int_0^t D - F(0) - (1/4) int_0^t ||grad v||^2`, with trapezoid time
/// integrals over the records, divided by `max(1, |F(0)|)`.
pub fn lyapunov_identity_residual(series: &TimeSeries) -> Result<Vec<f64>> {
    let rec = &series.records;
    if rec.len() < 3 {
        return Err(Error::SeriesTooShort { got: rec.len(), need: 3 });
    }
    Ok(identity_residual_to_date(rec))
}

/// The residual of [`lyapunov_identity_residual`] at every record, for any
/// record count; zero at the first record.
pub fn identity_residual_to_date(rec: &[Record]) -> Vec<f64> {
    let Some(first) = rec.first() else {
        return Vec::new();
    };
    let f0 = first.diagnostics.f_lyap;
    let norm = f0.abs().max(1.0);
    let mut out = Vec::with_capacity(rec.len());
    out.push(0.0);
    let mut acc = 0.0;
    for pair in rec.windows(2) {
        let (a, b) = (&pair[0].diagnostics, &pair[1].diagnostics);
        let dt = pair[1].t - pair[0].t;
        acc += 0.5 * dt * ((a.d_diss - 0.25 * a.grad_v_sq) + (b.d_diss - 0.25 * b.grad_v_sq));
        out.push((b.f_lyap + acc - f0) / norm);
    }
    out
}

/// `E_0(v) = ||v_t||^2 + d1 d2 ||Lap v||^2 + (d1 l2 + d2 l1)||grad v||^2 + l1 l2 ||v||^2`.
pub fn energy_e0(state: &State, params: &Params) -> f64 {
    state.vt.inner(&state.vt) + 2.0 * quadratic_form(&state.v, params)
}

/// `L(u,v,w) = int (1+u)log(1+u) + E_0(v)/(2 d1) + ||w||^2/(2 d1)
/// + (l2/(d1 d2)) ||grad W||^2` with `W = (-Lap)^{-1} w`.
pub fn energy_l(state: &State, params: &Params) -> Result<f64> {
    let wpot = poisson_solve(&state.w)?;
    let grad_w = if params.lambda2 == 0.0 {
        0.0
    } else {
        poisson_energy(&state.w, &wpot)
    };
    Ok(modified_entropy(&state.u)?
        + energy_e0(state, params) / (2.0 * params.d1)
        + state.w.inner(&state.w) / (2.0 * params.d1)
        + params.lambda2 / (params.d1 * params.d2) * grad_w)
}

/// `D_1(u,v,w) = D_0 + ||grad W_t||^2/(d1 d2) + (l2/d1)||w||^2 + (l2^2/(d1 d2))||grad W||^2`,
/// `D_0 = int |grad u|^2/(1+u) + ((l1+l2)/d1)||v_t||^2 + ((d1+d2)/d1)||grad v_t||^2`,
/// with `W_t = (-Lap)^{-1}(d2 Lap w - l2 w + u)`.
pub fn dissipation_d1(state: &State, params: &Params) -> Result<f64> {
    let (d1, d2, l1, l2) = (params.d1, params.d2, params.lambda1, params.lambda2);
    state.u.check_nonnegative()?;
    let wpot = poisson_solve(&state.w)?;
    let wt = v_time_derivative(&state.w, &state.u, &Params { d1: d2, d2: d1, lambda1: l2, lambda2: l1 });
    let wt_pot = poisson_potential(&wt);
    let d0 = fisher_information(&state.u)
        + (l1 + l2) / d1 * state.vt.inner(&state.vt)
        + (d1 + d2) / d1 * grad_sq(&state.vt);
    Ok(d0
        + poisson_energy(&wt, &wt_pot) / (d1 * d2)
        + l2 / d1 * state.w.inner(&state.w)
        + l2 * l2 / (d1 * d2) * poisson_energy(&state.w, &wpot))
}

/// Every monitored functional of `state`.
pub fn diagnostics(state: &State, params: &Params) -> Result<Diagnostics> {
    let entropy = modified_entropy(&state.u)?;
    let e_chem = chemical_energy(&state.v, &state.u, params)?;
    let vt_sq = state.vt.inner(&state.vt);
    Ok(Diagnostics {
        mass_u: state.u.integral(),
        mass_w: state.w.integral(),
        entropy,
        e_chem,
        f_lyap: entropy + 0.5 * vt_sq + e_chem,
        d_diss: dissipation_d(state, params)?,
        l_energy: energy_l(state, params)?,
        d1_diss: dissipation_d1(state, params)?,
        sup_u: state.u.max_abs(),
        vt_sq,
        grad_v_sq: grad_sq(&state.v),
        lp_4_3: lp_norm(&state.u, 4.0 / 3.0)?,
        lp_3_2: lp_norm(&state.u, 1.5)?,
        lp_2: lp_norm(&state.u, 2.0)?,
    })
}

/// Exponential integral of the fourth-order solution and the right side of
/// its bound with the unquantified constant set to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BrezisMerle {
    /// `int (exp(v_f) - 1) dx`
    pub integral: f64,
    /// `(e^{2 gamma M} / kappa)(2^{gamma M} / (32 pi^2 d1 d2 - M) + 1)`
    pub bound_rhs: f64,
}

/// Requires `lambda1, lambda2 > 0` and `||f||_1 < 32 pi^2 d1 d2`.
pub fn brezis_merle_integral(f: &Field, params: &Params) -> Result<BrezisMerle> {
    if params.lambda1 <= 0.0 || params.lambda2 <= 0.0 {
        return Err(Error::InvalidParams("exponential integral needs lambda1, lambda2 > 0".into()));
    }
    f.check_nonnegative()?;
    let m = f.integral();
    let limit = 32.0 * PI * PI * params.d1 * params.d2;
    if m >= limit {
        return Err(Error::InvalidArgument(format!("mass {m} must be below 32 pi^2 d1 d2 = {limit}")));
    }
    let vf = biharmonic_factored_solve(f, params)?;
    let integral = vf.map(f64::exp_m1).integral();
    let gamma = 1.0 / (8.0 * PI * PI * params.d1 * params.d2);
    let kappa = (params.lambda1 / params.d1).min(params.lambda2 / params.d2);
    let bound_rhs = (2.0 * gamma * m).exp() / kappa * (2f64.powf(gamma * m) / (limit - m) + 1.0);
    Ok(BrezisMerle { integral, bound_rhs })
}

/// The truncation `phi_N`: 0 on `[0,N]`, `2(s-N)` on `[N,2N]`, `s` beyond.
pub fn phi_n(s: f64, n: f64) -> f64 {
    if s <= n {
        0.0
    } else if s <= 2.0 * n {
        2.0 * (s - n)
    } else {
        s
    }
}

/// Exponent `p` in the tail estimate of the truncation.
pub const TRUNCATION_P: f64 = 1.5;

/// The three estimates for `g = phi_N(sqrt f)`:
/// gradient `||grad g||^2 <= 2 int |grad f|^2/(1+f)`,
/// entropy `||g||^2 <= int (1+f)log(1+f) / log(1+N^2)`, and
/// tail `||g - sqrt f||_{2p}^{2p} <= N^{2(p-1)} ||f||_1` with `p = 3/2`.
pub fn truncation_subinequalities(f: &Field, n: f64) -> Result<[InequalityReport; 3]> {
    if !(n.is_finite() && n >= 1.0) {
        return Err(Error::InvalidArgument(format!("truncation level must be >= 1, got {n}")));
    }
    f.check_nonnegative()?;
    let root = f.map(|x| x.max(0.0).sqrt());
    let g = root.map(|s| phi_n(s, n));
    let witness = format!("N={n}");
    let gradient = InequalityReport::new(
        "truncation_gradient",
        grad_sq(&g),
        2.0 * fisher_information(f),
        witness.clone(),
    );
    let entropy = InequalityReport::new(
        "truncation_entropy",
        g.inner(&g),
        modified_entropy(f)? / (n * n).ln_1p(),
        witness.clone(),
    );
    let p = TRUNCATION_P;
    let tail_lhs = g.zip_map(&root, |a, b| (a - b).abs().powf(2.0 * p)).integral();
    let tail = InequalityReport::new(
        "truncation_tail",
        tail_lhs,
        n.powf(2.0 * (p - 1.0)) * f.integral(),
        witness,
    );
    Ok([gradient, entropy, tail])
}

/// The tail estimate with the constant `(2N)^{p-1}`. This constant is too
/// small once `N > 2` (a plateau `f = N^2` violates it), so the report is
/// informational only.
pub fn truncation_tail_literal(f: &Field, n: f64) -> Result<InequalityReport> {
    f.check_nonnegative()?;
    let p = TRUNCATION_P;
    let root = f.map(|x| x.max(0.0).sqrt());
    let lhs = root.map(|s| (phi_n(s, n) - s).abs().powf(2.0 * p)).integral();
    Ok(InequalityReport::new(
        "truncation_tail_literal",
        lhs,
        (2.0 * n).powf(p - 1.0) * f.integral(),
        format!("N={n}"),
    ))
}

/// Right side of the modified Sobolev estimate
/// `C_S^2 (1+eps)^2 ||f||_1 int |grad f|^2/(1+f) + (sqrt(1+eps)/eps)(4/3)^{3/2} ||f||_1^{3/2}`.
fn modified_sobolev_rhs(f: &Field, eps: f64) -> f64 {
    let m = f.integral();
    c_s().powi(2) * (1.0 + eps).powi(2) * m * fisher_information(f)
        + (1.0 + eps).sqrt() / eps * (4.0f64 / 3.0).powf(1.5) * m.powf(1.5)
}

/// `||f||_{4/3}^2` against [`modified_sobolev_rhs`].
pub fn modified_sobolev_check(f: &Field, eps: f64) -> Result<InequalityReport> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    f.check_nonnegative()?;
    Ok(InequalityReport::new(
        "modified_sobolev",
        lp_norm(f, 4.0 / 3.0)?.powi(2),
        modified_sobolev_rhs(f, eps),
        format!("eps={eps}"),
    ))
}

/// `int f (-Lap)^{-1} f` against `(C_HLS / 4 pi^2) ||f||_{4/3}^2`.
pub fn hls_check(f: &Field) -> Result<InequalityReport> {
    let u = poisson_solve(f)?;
    Ok(InequalityReport::new(
        "hls",
        f.inner(&u),
        c_hls() / (4.0 * PI * PI) * lp_norm(f, 4.0 / 3.0)?.powi(2),
        "",
    ))
}

/// `||f||_{4/3}` against `C_S ||grad f||_1`.
pub fn sobolev_check(f: &Field) -> Result<InequalityReport> {
    Ok(InequalityReport::new(
        "sobolev",
        lp_norm(f, 4.0 / 3.0)?,
        c_s() * grad_l1(f),
        "",
    ))
}

/// HLS composed with the modified Sobolev estimate:
/// `int f (-Lap)^{-1} f <= kappa* (1+eps)^2 ||f||_1 int |grad f|^2/(1+f) + lower order`.
pub fn chained_hls_check(f: &Field, eps: f64) -> Result<InequalityReport> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let u = poisson_solve(f)?;
    Ok(InequalityReport::new(
        "hls_modified_sobolev",
        f.inner(&u),
        c_hls() / (4.0 * PI * PI) * modified_sobolev_rhs(f, eps),
        format!("eps={eps}"),
    ))
}

/// Constants of the differential inequality `L' + C1 (L + D1) <= C2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundLFit {
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub violation_fraction: f64,
    /// The fitted inequality holds on at least 99% of intervals and the
    /// energy stays below the Gronwall envelope `L(0) e^{-C1 t} + (C2/C1)(1 - e^{-C1 t})`.
    pub conforming: bool,
}

/// Minimum record count for [`bound_l_inequality_fit`].
pub const BOUND_FIT_MIN_RECORDS: usize = 16;

/// Candidate values of `C1`, log-spaced over `[1e-4, 1e2]`.
pub fn bound_fit_c1_grid() -> Vec<f64> {
    (0..=120).map(|k| 10f64.powf(-4.0 + 6.0 * k as f64 / 120.0)).collect()
}

/// Fits `C1, C2` to the recorded `L` and `D1`.
///
/// For each candidate `C1` the smallest `C2` that holds on 99% of the
/// intervals is the 99% quantile of `dL/dt + C1 (L + D1)` (interval means),
/// clipped at zero. The pair with the smallest asymptotic bound `C2/C1` is
/// returned, ties going to the larger `C1`.
pub fn bound_l_inequality_fit(series: &TimeSeries) -> Result<BoundLFit> {
    let rec = &series.records;
    if rec.len() < BOUND_FIT_MIN_RECORDS {
        return Err(Error::SeriesTooShort {
            got: rec.len(),
            need: BOUND_FIT_MIN_RECORDS,
        });
    }
    let intervals: Vec<(f64, f64)> = rec
        .windows(2)
        .map(|p| {
            let (a, b) = (&p[0].diagnostics, &p[1].diagnostics);
            let slope = (b.l_energy - a.l_energy) / (p[1].t - p[0].t);
            let level = 0.5 * (a.l_energy + b.l_energy + a.d1_diss + b.d1_diss);
            (slope, level)
        })
        .collect();
    let m = intervals.len();
    let k = ((0.99 * m as f64).ceil() as usize).clamp(1, m) - 1;
    let mut best: Option<(f64, f64, f64)> = None;
    let mut g = vec![0.0; m];
    for c1 in bound_fit_c1_grid() {
        for (gi, (slope, level)) in g.iter_mut().zip(&intervals) {
            *gi = slope + c1 * level;
        }
        let mut sorted = g.clone();
        sorted.sort_by(f64::total_cmp);
        let c2 = sorted[k].max(0.0);
        let ratio = c2 / c1;
        if !ratio.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, _, r)) => ratio <= r,
        };
        if better {
            best = Some((c1, c2, ratio));
        }
    }
    let (c1, c2, _) = best.ok_or_else(|| Error::InvalidArgument("series energies are not finite".into()))?;
    let violations = intervals.iter().filter(|(s, l)| s + c1 * l > c2).count();
    let violation_fraction = violations as f64 / m as f64;
    let l0 = rec[0].diagnostics.l_energy;
    let t0 = rec[0].t;
    let envelope_ok = rec.iter().all(|r| {
        let decay = (-c1 * (r.t - t0)).exp();
        let bound = l0 * decay + c2 / c1 * (1.0 - decay);
        r.diagnostics.l_energy <= bound + 1e-6 * (bound.abs() + 1.0)
    });
    Ok(BoundLFit {
        c1_hat: c1,
        c2_hat: c2,
        violation_fraction,
        conforming: violation_fraction <= 0.01 && envelope_ok,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::evolution::{GridDigest, Record, RunMetadata};
    use crate::model::{build_grid, gaussian_bump, RadialGrid};

    fn grid(r: f64, n: usize) -> Arc<RadialGrid> {
        build_grid(r, n).unwrap()
    }

    /// `2 pi^2 int_0^R f(r) r^3 dr` by composite Simpson on a fine mesh.
    fn simpson_r3(f: impl Fn(f64) -> f64, r_max: f64) -> f64 {
        let m = 200_000;
        let h = r_max / m as f64;
        let mut s = 0.0;
        for k in 0..=m {
            let r = k as f64 * h;
            let c = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += c * f(r) * r.powi(3);
        }
        SPHERE_AREA * s * h / 3.0
    }

    fn state_of(u: Field, v: Field, w: Field, params: &Params) -> State {
        State::new(0.0, u, v, w, params).unwrap()
    }

    fn series_of(diags: Vec<(f64, Diagnostics)>, g: &Arc<RadialGrid>) -> TimeSeries {
        TimeSeries {
            params: Params::unit(),
            grid: GridDigest { r_max: g.r_max(), n: g.len() },
            records: diags.into_iter().map(|(t, diagnostics)| Record { t, diagnostics }).collect(),
            states: Vec::new(),
            final_state: State::zeros(g),
            meta: RunMetadata::default(),
        }
    }

    #[test]
    fn constants_identity() {
        let r = constant_identity();
        assert!(r.passed);
        assert!(r.margin.abs() <= 1e-14);
        assert!((c_hls() - (1.5f64).sqrt() * PI).abs() < 1e-15);
    }

    #[test]
    fn report_pass_rule() {
        let r = InequalityReport::with_slack("x", 1.0 + 1e-9, 1.0, 1e-8, "");
        assert!(r.passed);
        let r = InequalityReport::with_slack("x", 1.0 + 1e-7, 1.0, 1e-8, "");
        assert!(!r.passed);
        assert_eq!(r.passed, r.margin >= -r.slack);
    }

    #[test]
    fn sobolev_norm_basics() {
        let g = grid(10.0, 256);
        for order in 0..=2 {
            assert_eq!(sobolev_norm(&Field::zeros(&g), order, 2.0).unwrap(), 0.0);
        }
        let c = Field::constant(&g, 0.7);
        let base = lp_norm(&c, 1.5).unwrap();
        assert!((sobolev_norm(&c, 1, 1.5).unwrap() - base).abs() <= 1e-14 * base);
        assert!(sobolev_norm(&c, 3, 2.0).is_err());
    }

    #[test]
    fn sobolev_norm_of_gaussian() {
        let g = grid(10.0, 512);
        let f = Field::from_fn(&g, |r| (-r * r).exp());
        let got = sobolev_norm(&f, 2, 2.0).unwrap();
        let l2 = |h: &dyn Fn(f64) -> f64| simpson_r3(|r| h(r).powi(2), 10.0).sqrt();
        let oracle = l2(&|r: f64| (-r * r).exp())
            + l2(&|r: f64| -2.0 * r * (-r * r).exp())
            + l2(&|r: f64| (4.0 * r * r - 8.0) * (-r * r).exp())
            + l2(&|r: f64| -2.0 * (-r * r).exp());
        assert!((got - oracle).abs() <= 1e-3 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn entropy_values() {
        let g = grid(20.0, 512);
        assert_eq!(modified_entropy(&Field::zeros(&g)).unwrap(), 0.0);
        let u = Field::from_fn(&g, |r| 5.0 * (-r * r).exp());
        let got = modified_entropy(&u).unwrap();
        let oracle = simpson_r3(
            |r| {
                let x = 5.0 * (-r * r).exp();
                (1.0 + x) * x.ln_1p()
            },
            20.0,
        );
        assert!((got - oracle).abs() <= 1e-6 * oracle, "{got} vs {oracle}");
        assert!(modified_entropy(&u.scale(2.0)).unwrap() >= got);
        let neg = Field::from_fn(&g, |r| if r < 1.0 { -1.0 } else { 1.0 });
        assert!(matches!(modified_entropy(&neg), Err(Error::NegativeValues { .. })));
    }

    #[test]
    fn energy_of_minimizer() {
        let g = grid(20.0, 512);
        let p = Params::new(1.0, 0.5, 1.0, 2.0).unwrap();
        let f = gaussian_bump(1.0, 50.0, &g).unwrap();
        let vf = biharmonic_factored_solve(&f, &p).unwrap();
        let e = chemical_energy(&vf, &f, &p).unwrap();
        let expect = -0.5 * vf.inner(&f);
        assert!((e - expect).abs() <= 1e-8 * expect.abs(), "{e} vs {expect}");
        assert_eq!(chemical_energy(&Field::zeros(&g), &f, &p).unwrap(), 0.0);
        let gap = minimization_gap(&vf, &f, &p).unwrap();
        assert!(gap.gap.abs() <= 1e-10 * gap.scale);
        assert_eq!(gap.quadratic_form, 0.0);
    }

    #[test]
    fn lyapunov_lower_bound_at_minimizer() {
        let g = grid(20.0, 256);
        let p = Params::unit();
        let u = gaussian_bump(1.0, 100.0, &g).unwrap();
        let vu = biharmonic_factored_solve(&u, &p).unwrap();
        let s = state_of(u.clone(), vu.clone(), Field::zeros(&g), &p);
        let f = lyapunov_f(&s, &p).unwrap();
        assert!(f + 0.5 * u.inner(&vu) >= 0.0);
        assert_eq!(lyapunov_f(&State::zeros(&g), &p).unwrap(), 0.0);
    }

    #[test]
    fn dissipation_special_states() {
        let g = grid(10.0, 128);
        let p = Params::unit();
        assert_eq!(dissipation_d(&State::zeros(&g), &p).unwrap(), 0.0);
        assert_eq!(dissipation_d1(&State::zeros(&g), &p).unwrap(), 0.0);
        let c = 0.8f64;
        let s = state_of(
            Field::constant(&g, c),
            Field::constant(&g, 2.0 * c.ln_1p()),
            Field::zeros(&g),
            &p,
        );
        let terms = dissipation_terms(&s, &p).unwrap();
        assert_eq!(terms[0], 0.0);
        assert_eq!(terms[1], 0.0);
        assert_eq!(fisher_information(&s.u), 0.0);
    }

    #[test]
    fn energy_l_terms() {
        let g = grid(20.0, 512);
        assert_eq!(energy_l(&State::zeros(&g), &Params::unit()).unwrap(), 0.0);
        let u = gaussian_bump(1.0, 30.0, &g).unwrap();
        let w = gaussian_bump(1.5, 10.0, &g).unwrap();
        let v = gaussian_bump(2.0, 5.0, &g).unwrap();
        let p0 = Params::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let s = state_of(u, v, w.clone(), &p0);
        let without = modified_entropy(&s.u).unwrap()
            + energy_e0(&s, &p0) / 2.0
            + s.w.inner(&s.w) / 2.0;
        assert_eq!(energy_l(&s, &p0).unwrap(), without);
        let wpot = poisson_solve(&w).unwrap();
        let by_parts = w.inner(&wpot);
        let energy = poisson_energy(&w, &wpot);
        assert!((energy - by_parts).abs() <= 1e-6 * by_parts, "{energy} vs {by_parts}");
    }

    #[test]
    fn brezis_merle_cases() {
        let g = grid(20.0, 512);
        let p = Params::unit();
        let zero = brezis_merle_integral(&Field::zeros(&g), &p).unwrap();
        assert_eq!(zero.integral, 0.0);
        let f = gaussian_bump(1.0, 1e-3, &g).unwrap();
        let bm = brezis_merle_integral(&f, &p).unwrap();
        let vf = biharmonic_factored_solve(&f, &p).unwrap();
        let lin = vf.integral();
        assert!((lin - 1e-3).abs() <= 1e-12, "{lin}");
        assert!(bm.integral - lin <= 1e-4 * lin && bm.integral >= lin);
        let base = gaussian_bump(1.0, 40.0, &g).unwrap();
        let vals: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&a| brezis_merle_integral(&base.scale(a), &p).unwrap().integral)
            .collect();
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        assert!(bm.bound_rhs.is_finite() && bm.bound_rhs > 0.0);
        assert!(brezis_merle_integral(&f, &Params::new(1.0, 1.0, 0.0, 1.0).unwrap()).is_err());
        let big = gaussian_bump(1.0, 32.0 * PI * PI, &g).unwrap();
        assert!(brezis_merle_integral(&big, &p).is_err());
    }

    #[test]
    fn truncation_trivial_cases() {
        let g = grid(10.0, 256);
        for r in truncation_subinequalities(&Field::zeros(&g), 2.0).unwrap() {
            assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
            assert!(r.passed);
        }
        let f = Field::from_fn(&g, |r| 3.9 * (-r * r).exp());
        let reps = truncation_subinequalities(&f, 2.0).unwrap();
        assert_eq!(reps[0].lhs, 0.0);
        assert_eq!(reps[1].lhs, 0.0);
        assert!(reps.iter().all(|r| r.passed));
        assert!(truncation_subinequalities(&f, 0.5).is_err());
    }

    #[test]
    fn literal_tail_constant_fails_for_large_truncation() {
        // sqrt f near 16 = N on a wide region: |phi_N(s) - s| = s there, so the
        // tail is about N^2 ||f||_1 / N^2 ... of order N ||f||_1 > sqrt(2N) ||f||_1.
        let g = grid(20.0, 1024);
        let f = Field::from_fn(&g, |r| 256.0 * (-r * r).exp());
        let literal = truncation_tail_literal(&f, 16.0).unwrap();
        assert!(!literal.passed, "{literal:?}");
        let corrected = &truncation_subinequalities(&f, 16.0).unwrap()[2];
        assert!(corrected.passed);
    }

    #[test]
    fn sobolev_type_checks_on_gaussians() {
        let g = grid(20.0, 1024);
        let f = gaussian_bump(1.0, 20.0, &g).unwrap();
        for r in [
            hls_check(&f).unwrap(),
            sobolev_check(&f).unwrap(),
            modified_sobolev_check(&f, 1.0).unwrap(),
            chained_hls_check(&f, 1.0).unwrap(),
        ] {
            assert!(r.passed && r.margin > 0.0, "{r:?}");
        }
        let z = Field::zeros(&g);
        for r in [hls_check(&z).unwrap(), sobolev_check(&z).unwrap(), modified_sobolev_check(&z, 1.0).unwrap()] {
            assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        }
        assert!(modified_sobolev_check(&f, 0.0).is_err());
    }

    #[test]
    fn hls_margin_shrinks_towards_extremal() {
        let g = grid(20.0, 2048);
        let margins: Vec<f64> = [6.0, 4.0, 3.5, 3.25, 3.1]
            .iter()
            .map(|&b| {
                let r = hls_check(&Field::from_fn(&g, |r| (1.0 + r * r).powf(-b))).unwrap();
                assert!(r.passed, "beta={b}: {r:?}");
                r.margin / r.rhs
            })
            .collect();
        assert!(margins.windows(2).all(|w| w[1] < w[0]), "{margins:?}");
    }

    #[test]
    fn sobolev_steep_bump() {
        let g = grid(20.0, 2048);
        let f = Field::from_fn(&g, |r| 0.5 * (1.0 - ((r - 1.0) / 0.02).tanh()));
        let r = sobolev_check(&f).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.margin / r.rhs < 0.02);
    }

    #[test]
    fn residual_and_fit_of_zero_series() {
        let g = grid(10.0, 64);
        let p = Params::unit();
        let d = diagnostics(&State::zeros(&g), &p).unwrap();
        let s = series_of((0..20).map(|k| (0.1 * k as f64, d)).collect(), &g);
        let res = lyapunov_identity_residual(&s).unwrap();
        assert!(res.iter().all(|&x| x == 0.0));
        let fit = bound_l_inequality_fit(&s).unwrap();
        assert_eq!(fit.c2_hat, 0.0);
        assert_eq!(fit.violation_fraction, 0.0);
        assert!(fit.c1_hat > 0.0 && fit.conforming);
        let short = series_of((0..2).map(|k| (k as f64, d)).collect(), &g);
        assert!(matches!(lyapunov_identity_residual(&short), Err(Error::SeriesTooShort { .. })));
        assert!(matches!(bound_l_inequality_fit(&short), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn diagnostics_are_consistent() {
        let g = grid(20.0, 256);
        let p = Params::unit();
        let u = gaussian_bump(1.0, 40.0, &g).unwrap();
        let v = gaussian_bump(1.5, 3.0, &g).unwrap();
        let w = gaussian_bump(1.2, 6.0, &g).unwrap();
        let s = state_of(u, v, w, &p);
        let d = diagnostics(&s, &p).unwrap();
        assert_eq!(d.f_lyap, d.entropy + 0.5 * d.vt_sq + d.e_chem);
        assert_eq!(d.f_lyap, lyapunov_f(&s, &p).unwrap());
        assert!(d.entropy >= 0.0 && d.l_energy >= 0.0 && d.d1_diss >= 0.0 && d.d_diss >= 0.0);
    }

    fn bump_mixture(g: &Arc<RadialGrid>, parts: &[(f64, f64)]) -> Field {
        parts.iter().fold(Field::zeros(g), |acc, &(w, m)| acc.add(&gaussian_bump(w, m, g).unwrap()))
    }

    fn mixture() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.7f64..3.0, 1.0f64..300.0), 1..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gap_equals_quadratic_form(parts in mixture(), amp in -5.0f64..5.0, width in 0.5f64..3.0) {
            let g = grid(20.0, 256);
            let p = Params::unit();
            let u = bump_mixture(&g, &parts);
            let vu = biharmonic_factored_solve(&u, &p).unwrap();
            let v = vu.add(&Field::from_fn(&g, |r| amp * (-(r / width).powi(2)).exp()));
            let m = minimization_gap(&v, &u, &p).unwrap();
            prop_assert!(m.gap >= -1e-8 * m.scale);
            prop_assert!((m.gap - m.quadratic_form).abs() <= 1e-8 * m.scale.max(m.quadratic_form));
        }

        #[test]
        fn energy_without_source_is_nonnegative(amp in -5.0f64..5.0, width in 0.5f64..3.0) {
            let g = grid(20.0, 128);
            let v = Field::from_fn(&g, |r| amp * (-(r / width).powi(2)).exp());
            prop_assert!(chemical_energy(&v, &Field::zeros(&g), &Params::unit()).unwrap() >= 0.0);
        }

        #[test]
        fn dissipation_terms_nonnegative(parts in mixture(), va in -5.0f64..5.0, wa in 0.0f64..50.0) {
            let g = grid(20.0, 256);
            let p = Params::unit();
            let u = bump_mixture(&g, &parts);
            let v = Field::from_fn(&g, |r| va * (-r * r / 2.0).exp());
            let w = gaussian_bump(1.0, wa, &g).unwrap();
            let s = state_of(u, v, w, &p);
            for t in dissipation_terms(&s, &p).unwrap() {
                prop_assert!(t >= 0.0);
            }
            prop_assert!(dissipation_d1(&s, &p).unwrap() >= 0.0);
        }

        #[test]
        fn truncation_reports_pass(parts in mixture(), n in prop::sample::select(vec![1.0, 4.0, 16.0])) {
            let g = grid(20.0, 512);
            let f = bump_mixture(&g, &parts);
            for r in truncation_subinequalities(&f, n).unwrap() {
                prop_assert!(r.passed, "{:?}", r);
            }
        }
    }
}
