//! Mild solutions by fixed-point iteration of the Duhamel map.
//!
//! A trajectory lives on the graded mesh `t_j = T (j/m)^2`, `j = 0..=m`, with
//! `t_0 = 0` holding the data. Time integrals `int_0^t S(t-s) g(s) ds` use the
//! trapezoid rule on each mesh interval, computed by the recursion
//! `I_j = S(dt_j) [I_{j-1} + dt_j/2 g_{j-1}] + dt_j/2 g_j`.

use std::sync::Arc;

use serde::Serialize;
use statrs::function::gamma::{gamma_li, ln_gamma};

use crate::elliptic::HeatSemigroup;
use crate::error::{Error, Result};
use crate::evolution::{advection_divergence, AdvectionScheme};
use crate::functionals::sobolev_norm;
use crate::model::{lp_norm, Field, Params, RadialGrid};

/// `B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y)`.
pub fn beta(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta needs positive arguments, got ({x}, {y})")));
    }
    Ok((ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp())
}

/// `int_0^t e^{-lambda s} s^{-2(1-1/p)} ds` for `p` in `[1, 2)`.
///
/// With `a = 2/p - 1` this is `t^a / a` for `lambda = 0` and the lower
/// incomplete gamma function `lambda^{-a} gamma(a, lambda t)` otherwise.
pub fn i_lambda_p(lambda: f64, p: f64, t: f64) -> Result<f64> {
    if !(1.0..2.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("exponent must lie in [1, 2), got {p}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("decay must be >= 0, got {lambda}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    let a = 2.0 / p - 1.0;
    if t == 0.0 {
        return Ok(0.0);
    }
    if lambda == 0.0 {
        return Ok(t.powf(a) / a);
    }
    Ok(lambda.powf(-a) * gamma_li(a, lambda * t))
}

/// Integrability exponents of the solution space: `u(t)` in `L^{4/3}`,
/// `v(t)` in `W^{2,p}`, `w(t)` in `W^{1,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Self { p: 3.0, q: 1.8 }
    }
}

impl Exponents {
    /// Requires `2 < p < 4` and `4p/(p+4) < q < 2`.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        let e = Self { p, q };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let lower = 4.0 * self.p / (self.p + 4.0);
        if !(self.p > 2.0 && self.p < 4.0 && self.q > lower && self.q < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "exponents need 2 < p < 4 and {lower} < q < 2, got p={}, q={}",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

/// A trajectory `(u, v, w)` at the mesh times; index 0 is `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTriple {
    pub times: Vec<f64>,
    pub u: Vec<Field>,
    pub v: Vec<Field>,
    pub w: Vec<Field>,
    pub exponents: Exponents,
}

impl WeightedTriple {
    pub fn zeros(grid: &Arc<RadialGrid>, times: Vec<f64>, exponents: Exponents) -> Self {
        let z = vec![Field::zeros(grid); times.len()];
        Self {
            u: z.clone(),
            v: z.clone(),
            w: z,
            times,
            exponents,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Componentwise difference on the same mesh.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.times != other.times {
            return Err(Error::InvalidArgument("trajectories live on different time meshes".into()));
        }
        let diff = |a: &[Field], b: &[Field]| a.iter().zip(b).map(|(x, y)| x.sub(y)).collect();
        Ok(Self {
            times: self.times.clone(),
            u: diff(&self.u, &other.u),
            v: diff(&self.v, &other.v),
            w: diff(&self.w, &other.w),
            exponents: self.exponents,
        })
    }
}

/// `t_j = T (j/m)^2`.
pub fn graded_mesh(t_final: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|j| t_final * (j as f64 / m as f64).powi(2)).collect()
}

/// Weighted sup norms of a trajectory over `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XtNorms {
    /// `sup t^{1/2} ||u||_{4/3}`
    pub nu: f64,
    /// `sup t^{1-2/p} ||v||_{W^{2,p}}`
    pub nv: f64,
    /// `sup t^{3/2-2/q} ||w||_{W^{1,q}}`
    pub nw: f64,
}

impl XtNorms {
    pub fn total(&self) -> f64 {
        self.nu + self.nv + self.nw
    }
}

pub fn xt_norms(input: &WeightedTriple) -> Result<XtNorms> {
    let Exponents { p, q } = input.exponents;
    let mut n = XtNorms { nu: 0.0, nv: 0.0, nw: 0.0 };
    for (j, &t) in input.times.iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        n.nu = n.nu.max(t.sqrt() * lp_norm(&input.u[j], 4.0 / 3.0)?);
        n.nv = n.nv.max(t.powf(1.0 - 2.0 / p) * sobolev_norm(&input.v[j], 2, p)?);
        n.nw = n.nw.max(t.powf(1.5 - 2.0 / q) * sobolev_norm(&input.w[j], 1, q)?);
    }
    Ok(n)
}

/// Distance `N_u + N_v + N_w` of the difference of two trajectories.
pub fn xt_distance(a: &WeightedTriple, b: &WeightedTriple) -> Result<f64> {
    Ok(xt_norms(&a.sub(b)?)?.total())
}

/// Initial data `(u0, v0, w0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MildData {
    pub u0: Field,
    pub v0: Field,
    pub w0: Field,
}

/// Semigroups of the three components over every mesh interval.
#[derive(Debug, Clone)]
pub struct MildSolver {
    params: Params,
    times: Vec<f64>,
    exponents: Exponents,
    /// Per interval `j` (from `t_{j-1}` to `t_j`): substep count and the
    /// semigroups for `u`, `v`, `w`.
    steps: Vec<(usize, [HeatSemigroup; 3])>,
}

/// Default number of graded mesh intervals.
pub const DEFAULT_MESH: usize = 64;

impl MildSolver {
    /// Mesh with `m` intervals over `(0, T]`; each interval is split into
    /// Crank-Nicolson substeps no longer than `max_substep`.
    pub fn new(
        grid: &Arc<RadialGrid>,
        params: &Params,
        t_final: f64,
        m: usize,
        max_substep: f64,
        exponents: Exponents,
    ) -> Result<Self> {
        params.validate()?;
        exponents.validate()?;
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {t_final}")));
        }
        if m == 0 {
            return Err(Error::InvalidArgument("time mesh needs at least one interval".into()));
        }
        if !(max_substep.is_finite() && max_substep > 0.0) {
            return Err(Error::InvalidArgument(format!("substep must be positive, got {max_substep}")));
        }
        let times = graded_mesh(t_final, m);
        let mut steps = Vec::with_capacity(m);
        for pair in times.windows(2) {
            let dt = pair[1] - pair[0];
            let k = (dt / max_substep).ceil().max(1.0) as usize;
            let tau = dt / k as f64;
            steps.push((
                k,
                [
                    HeatSemigroup::new(grid, 1.0, 0.0, tau)?,
                    HeatSemigroup::new(grid, params.d1, params.lambda1, tau)?,
                    HeatSemigroup::new(grid, params.d2, params.lambda2, tau)?,
                ],
            ));
        }
        Ok(Self {
            params: *params,
            times,
            exponents,
            steps,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// `S(t_j) f0 + int_0^{t_j} S(t_j - s) g(s) ds` for component `c`.
    fn duhamel(&self, c: usize, f0: &Field, g: &[Field]) -> Result<Vec<Field>> {
        let mut out = Vec::with_capacity(self.times.len());
        out.push(f0.clone());
        let mut acc = f0.clone();
        for (j, (k, sg)) in self.steps.iter().enumerate() {
            let dt = self.times[j + 1] - self.times[j];
            let carried = acc.axpy(0.5 * dt, &g[j]);
            acc = sg[c].apply(&carried, *k)?.axpy(0.5 * dt, &g[j + 1]);
            out.push(acc.clone());
        }
        Ok(out)
    }

    /// Applies the Duhamel map to `input`:
    ///
    /// ```text
    /// Phi1 = e^{t Lap} u0 - int e^{(t-s) Lap} div(u grad v) ds
    /// Phi2 = e^{t(d1 Lap - l1)} v0 + int e^{(t-s)(d1 Lap - l1)} w ds
    /// Phi3 = e^{t(d2 Lap - l2)} w0 + int e^{(t-s)(d2 Lap - l2)} u ds
    /// ```
    ///
    /// The drift `div(u grad v)` uses central face values of `u`. It is
    /// evaluated before the semigroup acts; on the mesh, the divergence of the
    /// semigroup applied to face fluxes is the same quantity, since the flux
    /// Laplacian `grad div` and the node Laplacian `div grad` intertwine.
    pub fn phi_map(&self, input: &WeightedTriple, data: &MildData) -> Result<WeightedTriple> {
        if input.times != self.times {
            return Err(Error::InvalidArgument("input trajectory is not on the solver mesh".into()));
        }
        let drift: Vec<Field> = input
            .u
            .iter()
            .zip(&input.v)
            .map(|(u, v)| {
                let div = advection_divergence(u, v, AdvectionScheme::Central);
                Field::new(Arc::clone(u.grid()), div.into_iter().map(|d| -d).collect())
            })
            .collect::<Result<_>>()?;
        Ok(WeightedTriple {
            times: self.times.clone(),
            u: self.duhamel(0, &data.u0, &drift)?,
            v: self.duhamel(1, &data.v0, &input.w)?,
            w: self.duhamel(2, &data.w0, &input.u)?,
            exponents: self.exponents,
        })
    }

    pub fn zero_trajectory(&self, grid: &Arc<RadialGrid>) -> WeightedTriple {
        WeightedTriple::zeros(grid, self.times.clone(), self.exponents)
    }
}

/// Outcome of the fixed-point iteration.
#[derive(Debug, Clone)]
pub struct PicardResult {
    pub fixed_point: WeightedTriple,
    /// Distances between successive iterates.
    pub distances: Vec<f64>,
    /// Ratios of successive distances.
    pub ratios: Vec<f64>,
    pub converged: bool,
}

/// Iterates the Duhamel map from the zero trajectory until successive
/// iterates are within `tol` in the weighted distance or `k_max` maps were
/// applied. Three consecutive ratios at or above one abort the iteration.
pub fn picard_iterate(
    solver: &MildSolver,
    data: &MildData,
    k_max: usize,
    tol: f64,
) -> Result<PicardResult> {
    data.u0.check_same_grid(&data.v0)?;
    data.u0.check_same_grid(&data.w0)?;
    let mut current = solver.zero_trajectory(data.u0.grid());
    let mut distances = Vec::new();
    let mut ratios = Vec::new();
    let mut streak = 0;
    for _ in 0..k_max {
        let next = solver.phi_map(&current, data)?;
        let d = xt_distance(&next, &current)?;
        if !d.is_finite() {
            return Err(Error::NonFinite { time: *solver.times().last().unwrap() });
        }
        if let Some(&prev) = distances.last() {
            let r = if prev > 0.0 { d / prev } else { 0.0 };
            ratios.push(r);
            streak = if r >= 1.0 { streak + 1 } else { 0 };
            if streak >= 3 {
                return Err(Error::NonContraction { ratios });
            }
        }
        distances.push(d);
        current = next;
        if d <= tol {
            return Ok(PicardResult {
                fixed_point: current,
                distances,
                ratios,
                converged: true,
            });
        }
    }
    Ok(PicardResult {
        fixed_point: current,
        distances,
        ratios,
        converged: false,
    })
}
