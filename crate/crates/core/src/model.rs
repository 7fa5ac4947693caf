//! Parameters, the radial mesh, grid functions and the simulation state.
//!
//! Every radial function on R^4 is stored by its profile on `[0, R]`. Integrals
//! over R^4 become `2 pi^2 * sum_i V_i f(r_i)`, where `V_i` are the cell
//! volumes of the mesh against the density `r^3`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area of the unit 3-sphere.
pub const SPHERE_AREA: f64 = 2.0 * PI * PI;

/// Relative undershoot tolerance: values above `-TOL_NEG_REL * max|f|` count as nonnegative.
pub const TOL_NEG_REL: f64 = 1e-10;

/// Smallest admissible node count.
pub const MIN_NODES: usize = 16;

/// Diffusion and decay coefficients of the three-component system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub d1: f64,
    pub d2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Params {
    pub fn new(d1: f64, d2: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        let p = Self {
            d1,
            d2,
            lambda1,
            lambda2,
        };
        p.validate()?;
        Ok(p)
    }

    /// `d1 = d2 = lambda1 = lambda2 = 1`.
    pub fn unit() -> Self {
        Self {
            d1: 1.0,
            d2: 1.0,
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d1.is_finite() && self.d1 > 0.0) || !(self.d2.is_finite() && self.d2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "diffusivities must be positive, got d1={}, d2={}",
                self.d1, self.d2
            )));
        }
        if !(self.lambda1.is_finite() && self.lambda1 >= 0.0)
            || !(self.lambda2.is_finite() && self.lambda2 >= 0.0)
        {
            return Err(Error::InvalidParams(format!(
                "decay rates must be nonnegative, got lambda1={}, lambda2={}",
                self.lambda1, self.lambda2
            )));
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Thresholds {
        threshold_constants(self)
    }
}

/// Mass thresholds for global existence and for uniform boundedness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// `(8 pi)^2 d1 d2`
    pub m_global: f64,
    /// `(8 pi)^2 d1 d2 / sqrt(3)`
    pub m_bounded: f64,
    /// `sqrt(3) / (8 pi)^2`
    pub kappa_star: f64,
}

pub fn threshold_constants(params: &Params) -> Thresholds {
    let eight_pi_sq = (8.0 * PI).powi(2);
    let m_global = eight_pi_sq * params.d1 * params.d2;
    Thresholds {
        m_global,
        m_bounded: m_global / 3f64.sqrt(),
        kappa_star: 3f64.sqrt() / eight_pi_sq,
    }
}

/// Uniform mesh `r_i = i h` on `[0, R]`.
///
/// Cell volumes are the trapezoid weights against `r^3`, with two adjustments:
/// the origin carries the volume `h^4/64` of its half cell (taken from node 1),
/// and the outer weight absorbs the trapezoid defect so that the volumes sum to
/// `R^4/4` exactly. Face areas follow from the discrete divergence theorem,
/// `a_{i+1/2} = 4 (V_0 + ... + V_i) / r_{i+1/2}`, which makes the flux-form
/// Laplacian exact on `r^2` and symmetric in the volume-weighted inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    r_max: f64,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    face_r: Vec<f64>,
    face_area: Vec<f64>,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !r_max.is_finite() || r_max <= 0.0 {
            return Err(Error::InvalidGrid(format!("outer radius must be positive and finite, got {r_max}")));
        }
        if n < MIN_NODES {
            return Err(Error::InvalidGrid(format!("need at least {MIN_NODES} nodes, got {n}")));
        }
        let h = r_max / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        nodes[n - 1] = r_max;

        let h4 = h.powi(4);
        let mut weights: Vec<f64> = nodes.iter().map(|r| h * r.powi(3)).collect();
        weights[0] = h4 / 64.0;
        weights[1] -= h4 / 64.0;
        weights[n - 1] = 0.5 * h * r_max.powi(3) - 0.25 * h * h * r_max * r_max;

        let face_r: Vec<f64> = (0..n - 1).map(|i| (i as f64 + 0.5) * h).collect();
        let mut face_area = Vec::with_capacity(n - 1);
        let mut cumulative = 0.0;
        for i in 0..n - 1 {
            cumulative += weights[i];
            face_area.push(4.0 * cumulative / face_r[i]);
        }

        Ok(Self {
            r_max,
            h,
            nodes,
            weights,
            face_r,
            face_area,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Cell volumes against `r^3 dr` (no sphere factor).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Face radii `r_{i+1/2}`, one per interior face.
    pub fn face_radii(&self) -> &[f64] {
        &self.face_r
    }

    /// Face areas `a_{i+1/2}` (no sphere factor), one per interior face.
    pub fn face_areas(&self) -> &[f64] {
        &self.face_area
    }

    /// `int_{R^4} f dx` for the radial profile `values`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        SPHERE_AREA * self.weights.iter().zip(values).map(|(w, f)| w * f).sum::<f64>()
    }
}

pub fn build_grid(r_max: f64, n: usize) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(r_max, n).map(Arc::new)
}

/// A radial profile sampled at the nodes of a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values on a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: Arc::clone(grid),
        }
    }

    pub fn constant(grid: &Arc<RadialGrid>, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid: Arc::clone(grid),
        }
    }

    /// Samples `f(r)` at every node.
    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: grid.nodes().iter().map(|&r| f(r)).collect(),
            grid: Arc::clone(grid),
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            values: self.values.iter().map(|&v| f(v)).collect(),
            grid: Arc::clone(&self.grid),
        }
    }

    /// Pointwise combination; panics if the grids differ in size.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.len(), other.len(), "zip_map on fields of different length");
        Field {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            grid: Arc::clone(&self.grid),
        }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `int_{R^4} f dx`.
    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// `int_{R^4} f g dx`.
    pub fn inner(&self, other: &Field) -> f64 {
        SPHERE_AREA
            * self
                .grid
                .weights()
                .iter()
                .zip(self.values.iter().zip(&other.values))
                .map(|(w, (a, b))| w * a * b)
                .sum::<f64>()
    }

    /// Undershoot tolerance `TOL_NEG_REL * max|f|`.
    pub fn tol_neg(&self) -> f64 {
        TOL_NEG_REL * self.max_abs()
    }

    /// Fails if any value is below `-tol_neg`.
    pub fn check_nonnegative(&self) -> Result<()> {
        let tol = self.tol_neg();
        let min = self.min();
        if min < -tol {
            Err(Error::NegativeValues { min, tol })
        } else {
            Ok(())
        }
    }

    /// Sets negative entries to zero and returns the removed mass `int f_- dx`.
    pub fn clip_negatives(&mut self) -> f64 {
        let mut removed = 0.0;
        for (v, w) in self.values.iter_mut().zip(self.grid.weights()) {
            if *v < 0.0 {
                removed -= w * *v;
                *v = 0.0;
            }
        }
        SPHERE_AREA * removed
    }
}

/// `||f||_p` with the radial measure of R^4; `p = f64::INFINITY` gives the max norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("L^p exponent must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let sum: f64 = f
        .grid
        .weights()
        .iter()
        .zip(&f.values)
        .map(|(w, v)| w * v.abs().powf(p))
        .sum();
    Ok((SPHERE_AREA * sum).powf(1.0 / p))
}

/// `||u||_1` of a density.
pub fn mass(u: &Field) -> Result<f64> {
    lp_norm(u, 1.0)
}

/// `A exp(-r^2 / width^2)` with `A` fixed so that the discrete mass is `mass_target`.
pub fn gaussian_bump(width: f64, mass_target: f64, grid: &Arc<RadialGrid>) -> Result<Field> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::InvalidArgument(format!("bump width must be positive, got {width}")));
    }
    if !(mass_target.is_finite() && mass_target >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bump mass must be nonnegative, got {mass_target}"
        )));
    }
    if width < 8.0 * grid.spacing() {
        return Err(Error::InvalidArgument(format!(
            "bump width {width} is resolved by fewer than 8 nodes (h = {})",
            grid.spacing()
        )));
    }
    let shape = Field::from_fn(grid, |r| (-(r / width).powi(2)).exp());
    if mass_target == 0.0 {
        return Ok(Field::zeros(grid));
    }
    let amplitude = mass_target / shape.integral();
    Ok(shape.scale(amplitude))
}

/// The triple `(u, v, w)` at time `t`, with `vt = d1 Lap v - lambda1 v + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub w: Field,
    pub vt: Field,
}

impl State {
    /// Builds a state and evaluates `vt` from the second equation.
    pub fn new(t: f64, u: Field, v: Field, w: Field, params: &Params) -> Result<Self> {
        u.check_same_grid(&v)?;
        u.check_same_grid(&w)?;
        let vt = crate::elliptic::v_time_derivative(&v, &w, params);
        Ok(Self { t, u, v, w, vt })
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        let z = Field::zeros(grid);
        Self {
            t: 0.0,
            u: z.clone(),
            v: z.clone(),
            w: z.clone(),
            vt: z,
        }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.w.is_finite() && self.vt.is_finite()
    }
}

/// All monitored functionals at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub mass_u: f64,
    pub mass_w: f64,
    pub entropy: f64,
    pub e_chem: f64,
    pub f_lyap: f64,
    pub d_diss: f64,
    pub l_energy: f64,
    pub d1_diss: f64,
    pub sup_u: f64,
    /// `||vt||_2^2`
    pub vt_sq: f64,
    /// `||grad v||_2^2`, the source term of the Lyapunov identity.
    pub grad_v_sq: f64,
    pub lp_4_3: f64,
    pub lp_3_2: f64,
    pub lp_2: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(r: f64, n: usize) -> Arc<RadialGrid> {
        build_grid(r, n).unwrap()
    }

    #[test]
    fn grid_spacing_and_endpoints() {
        let g = grid(20.0, 512);
        assert_eq!(g.spacing(), 20.0 / 511.0);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(*g.nodes().last().unwrap(), 20.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(g.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(RadialGrid::new(20.0, 15), Err(Error::InvalidGrid(_))));
        assert!(matches!(RadialGrid::new(f64::NAN, 64), Err(Error::InvalidGrid(_))));
        assert!(matches!(RadialGrid::new(f64::INFINITY, 64), Err(Error::InvalidGrid(_))));
        assert!(matches!(RadialGrid::new(-1.0, 64), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn weights_exact_for_constants() {
        for &(r, n) in &[(20.0, 512), (1.0, 16), (7.5, 1001)] {
            let g = grid(r, n);
            let s: f64 = g.weights().iter().sum();
            let exact = r.powi(4) / 4.0;
            assert!(((s - exact) / exact).abs() < 1e-12, "R={r} n={n}: {s} vs {exact}");
        }
    }

    #[test]
    fn weights_integrate_r() {
        let g = grid(20.0, 512);
        let s: f64 = g.weights().iter().zip(g.nodes()).map(|(w, r)| w * r).sum();
        let exact = 20f64.powi(5) / 5.0;
        assert!(((s - exact) / exact).abs() < 1e-4);
    }

    #[test]
    fn lp_norm_of_gaussian() {
        let g = grid(20.0, 512);
        let f = Field::from_fn(&g, |r| (-r * r).exp());
        let l1 = lp_norm(&f, 1.0).unwrap();
        assert!(((l1 - PI * PI) / (PI * PI)).abs() < 1e-6, "{l1}");
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(lp_norm(&Field::zeros(&g), 2.5).unwrap(), 0.0);
        assert!(lp_norm(&f, 0.5).is_err());
    }

    #[test]
    fn constant_quadrature() {
        let g = grid(20.0, 512);
        let c = 3.25;
        let l1 = lp_norm(&Field::constant(&g, c), 1.0).unwrap();
        let exact = c * SPHERE_AREA * 20f64.powi(4) / 4.0;
        assert!(((l1 - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn bump_normalisation() {
        let g = grid(20.0, 512);
        let b = gaussian_bump(1.0, 100.0, &g).unwrap();
        assert!((mass(&b).unwrap() - 100.0).abs() < 1e-10 * 100.0);
        let unit = gaussian_bump(1.0, PI * PI, &g).unwrap();
        assert!((unit.values()[0] - 1.0).abs() < 1e-6);
        let doubled = gaussian_bump(1.0, 200.0, &g).unwrap();
        for (a, b) in doubled.values().iter().zip(b.values()) {
            assert!((a - 2.0 * b).abs() <= 1e-14 * a.abs());
        }
        assert!(gaussian_bump(1.0, 0.0, &g).unwrap().values().iter().all(|&v| v == 0.0));
        let h = g.spacing();
        assert!(gaussian_bump(7.0 * h, 1.0, &g).is_err());
        assert!(gaussian_bump(1.0, -1.0, &g).is_err());
    }

    #[test]
    fn thresholds_unit_params() {
        let t = threshold_constants(&Params::unit());
        assert!((t.m_global - 631.6546816697189).abs() < 1e-9);
        assert!((t.m_bounded - 364.6863).abs() < 1e-3);
        assert!((t.m_bounded / t.m_global - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kappa_times_global_threshold() {
        for &(d1, d2) in &[(1.0, 1.0), (0.3, 2.0), (5.0, 0.1)] {
            let t = threshold_constants(&Params::new(d1, d2, 0.0, 0.0).unwrap());
            assert!((t.kappa_star * t.m_global - 3f64.sqrt() * d1 * d2).abs() < 1e-14);
        }
    }

    #[test]
    fn params_validation() {
        assert!(Params::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(Params::new(1.0, 1.0, -1.0, 0.0).is_err());
        assert!(Params::new(1.0, 1.0, 0.0, 0.0).is_ok());
    }

    #[test]
    fn scaled_profile_keeps_mass() {
        let mu = 2.0;
        let g = grid(20.0, 512);
        let gs = grid(20.0 / mu, 512);
        let f = |r: f64| (-(r * r)).exp() * (1.0 + 0.3 * r * r);
        let a = mass(&Field::from_fn(&g, f)).unwrap();
        let b = mass(&Field::from_fn(&gs, |r| mu.powi(4) * f(mu * r))).unwrap();
        assert!(((a - b) / a).abs() < 1e-12);
    }

    #[test]
    fn clipping_reports_removed_mass() {
        let g = grid(5.0, 32);
        let mut f = Field::from_fn(&g, |r| if r > 2.0 { -1e-3 } else { 1.0 });
        let neg = Field::from_fn(&g, |r| if r > 2.0 { 1e-3 } else { 0.0 }).integral();
        let removed = f.clip_negatives();
        assert!((removed - neg).abs() < 1e-15);
        assert!(f.min() >= 0.0);
    }
}
