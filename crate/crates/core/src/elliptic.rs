//! Radial differential operators on R^4 and their inverses.
//!
//! The Laplacian is the flux-form operator
//!
//! ```text
//! (L f)_i = [a_{i+1/2} (f_{i+1} - f_i) - a_{i-1/2} (f_i - f_{i-1})] / (h V_i)
//! ```
//!
//! with `a_{-1/2} = 0` at the origin and a zero-flux face at `r = R`. At `r = 0`
//! it reduces to `8 (f_1 - f_0) / h^2`, the ghost-reflection form of `4 f''(0)`.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Field, Params, RadialGrid, SPHERE_AREA};

/// Closure at `r = R` for the inverse operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Zero flux through the outer face.
    Neumann,
    /// Dirichlet value from the Poisson kernel tail, `int f / (4 pi^2 d R^2)`;
    /// zero when the decay rate is positive.
    FarField,
}

impl Closure {
    /// Neumann for `lambda > 0`, far field for `lambda = 0`.
    pub fn default_for(lambda: f64) -> Self {
        if lambda > 0.0 {
            Closure::Neumann
        } else {
            Closure::FarField
        }
    }
}

/// `E_4(r) = 1 / (4 pi^2 r^2)`, the fundamental solution of `-Lap` on R^4.
pub fn poisson_kernel(r: f64) -> f64 {
    1.0 / (4.0 * PI * PI * r * r)
}

/// `L f` at every node.
pub fn apply_laplacian4(f: &Field) -> Field {
    let grid = f.grid();
    let n = grid.len();
    let h = grid.spacing();
    let a = grid.face_areas();
    let vol = grid.weights();
    let x = f.values();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let right = if i + 1 < n { a[i] * (x[i + 1] - x[i]) } else { 0.0 };
        let left = if i > 0 { a[i - 1] * (x[i] - x[i - 1]) } else { 0.0 };
        out[i] = (right - left) / (h * vol[i]);
    }
    Field::new(Arc::clone(grid), out).expect("length preserved")
}

/// `(-d L + lambda) f`.
pub fn apply_helmholtz(f: &Field, d: f64, lambda: f64) -> Field {
    apply_laplacian4(f).zip_map(f, |lf, v| -d * lf + lambda * v)
}

/// `(-d1 L + lambda1)(-d2 L + lambda2) v`.
pub fn apply_biharmonic(v: &Field, params: &Params) -> Field {
    let inner = apply_helmholtz(v, params.d2, params.lambda2);
    apply_helmholtz(&inner, params.d1, params.lambda1)
}

/// `d1 L v - lambda1 v + w`, the right side of the `v` equation.
pub fn v_time_derivative(v: &Field, w: &Field, params: &Params) -> Field {
    let lv = apply_laplacian4(v);
    Field::new(
        Arc::clone(v.grid()),
        lv.values()
            .iter()
            .zip(v.values().iter().zip(w.values()))
            .map(|(l, (v, w))| params.d1 * l - params.lambda1 * v + w)
            .collect(),
    )
    .expect("length preserved")
}

/// Differences `f_{i+1} - f_i` across the interior faces.
pub fn face_differences(f: &Field) -> Vec<f64> {
    f.values().windows(2).map(|w| w[1] - w[0]).collect()
}

/// `int |grad f|^2 dx` inside the ball, as the discrete Dirichlet form
/// `2 pi^2 sum a_{i+1/2} (f_{i+1} - f_i)^2 / h`, which equals `-int f L f dx`
/// for the flux-form Laplacian.
pub fn grad_sq(f: &Field) -> f64 {
    grad_sq_weighted(f, |_| 1.0)
}

/// `int rho |grad f|^2 dx` with `rho` given per face index.
pub fn grad_sq_weighted(f: &Field, rho: impl Fn(usize) -> f64) -> f64 {
    let grid = f.grid();
    let h = grid.spacing();
    let s: f64 = grid
        .face_areas()
        .iter()
        .zip(face_differences(f))
        .enumerate()
        .map(|(i, (a, df))| rho(i) * a * df * df)
        .sum();
    SPHERE_AREA * s / h
}

/// `int |grad f| dx`, the total variation of the profile.
pub fn grad_l1(f: &Field) -> f64 {
    let grid = f.grid();
    let s: f64 = grid
        .face_areas()
        .iter()
        .zip(face_differences(f))
        .map(|(a, df)| a * df.abs())
        .sum();
    SPHERE_AREA * s
}

/// Radial derivative at the nodes: central differences, zero at the origin,
/// one-sided at `r = R`.
pub fn radial_derivative(f: &Field) -> Field {
    let grid = f.grid();
    let n = grid.len();
    let h = grid.spacing();
    let x = f.values();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (x[i + 1] - x[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (x[n - 1] - x[n - 2]) / h;
    Field::new(Arc::clone(grid), out).expect("length preserved")
}

/// `f'(r) / r`, with the limit `f''(0) = 2 (f_1 - f_0) / h^2` at the origin.
pub fn radial_derivative_over_r(f: &Field) -> Field {
    let grid = f.grid();
    let h = grid.spacing();
    let x = f.values();
    let mut out = radial_derivative(f).into_values();
    out[0] = 2.0 * (x[1] - x[0]) / (h * h);
    for (o, r) in out.iter_mut().zip(grid.nodes()).skip(1) {
        *o /= r;
    }
    Field::new(Arc::clone(grid), out).expect("length preserved")
}

/// Face-flux divergence `(F_{i+1/2} - F_{i-1/2}) / V_i` for fluxes that
/// already include the face area; the boundary faces carry no flux.
pub fn flux_divergence(grid: &RadialGrid, flux: &[f64]) -> Vec<f64> {
    let n = grid.len();
    debug_assert_eq!(flux.len(), n - 1);
    let vol = grid.weights();
    (0..n)
        .map(|i| {
            let right = if i + 1 < n { flux[i] } else { 0.0 };
            let left = if i > 0 { flux[i - 1] } else { 0.0 };
            (right - left) / vol[i]
        })
        .collect()
}

/// Thomas factorization of a tridiagonal matrix without pivoting.
#[derive(Debug, Clone)]
struct Thomas {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Thomas {
    fn factor(lower: Vec<f64>, diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut c_prime = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        for i in 0..n {
            let pivot = diag[i] - if i > 0 { lower[i] * c_prime[i - 1] } else { 0.0 };
            if !pivot.is_finite() || pivot.abs() < 1e-300 {
                return Err(Error::Singular(format!("zero pivot at row {i}")));
            }
            inv_pivot[i] = 1.0 / pivot;
            c_prime[i] = upper[i] * inv_pivot[i];
        }
        Ok(Self {
            lower,
            c_prime,
            inv_pivot,
        })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - self.lower[i] * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.c_prime[i] * x[i + 1];
        }
    }
}

/// Factored `(-d L + lambda)` on a fixed grid.
#[derive(Debug, Clone)]
pub struct HelmholtzSolver {
    grid: Arc<RadialGrid>,
    d: f64,
    lambda: f64,
    closure: Closure,
    factor: Thomas,
}

impl HelmholtzSolver {
    pub fn new(grid: &Arc<RadialGrid>, d: f64, lambda: f64, closure: Closure) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidArgument(format!("diffusivity must be positive, got {d}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("decay must be nonnegative, got {lambda}")));
        }
        if lambda == 0.0 && closure == Closure::Neumann {
            return Err(Error::Singular(
                "pure Neumann Laplacian has constants in its kernel; use the far-field closure".into(),
            ));
        }
        let n = grid.len();
        let h = grid.spacing();
        let a = grid.face_areas();
        let vol = grid.weights();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let scale = d / (h * vol[i]);
            let right = if i + 1 < n { a[i] * scale } else { 0.0 };
            let left = if i > 0 { a[i - 1] * scale } else { 0.0 };
            lower[i] = -left;
            upper[i] = -right;
            diag[i] = lambda + left + right;
        }
        if closure == Closure::FarField {
            lower[n - 1] = 0.0;
            diag[n - 1] = 1.0;
        }
        let factor = Thomas::factor(lower, &diag, &upper)?;
        Ok(Self {
            grid: Arc::clone(grid),
            d,
            lambda,
            closure,
            factor,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    /// Solves `(-d L + lambda) v = f`.
    pub fn solve(&self, f: &Field) -> Result<Field> {
        if f.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        let mut x = f.values().to_vec();
        if self.closure == Closure::FarField {
            let n = x.len();
            x[n - 1] = if self.lambda == 0.0 {
                let r = self.grid.r_max();
                f.integral() * poisson_kernel(r) / self.d
            } else {
                0.0
            };
        }
        self.factor.solve_in_place(&mut x);
        let out = Field::new(Arc::clone(&self.grid), x)?;
        if !out.is_finite() {
            return Err(Error::NonFinite { time: f64::NAN });
        }
        Ok(out)
    }
}

/// Solves `(-d L + lambda) v = f` with the default closure for `lambda`.
pub fn helmholtz_solve(f: &Field, d: f64, lambda: f64) -> Result<Field> {
    HelmholtzSolver::new(f.grid(), d, lambda, Closure::default_for(lambda))?.solve(f)
}

/// `(-Lap)^{-1} f` for a signed source, by the radial representation
/// `r^3 U'(r) = -int_0^r s^3 f ds` and inward integration from the
/// far-field value `int f / (4 pi^2 R^2)`.
pub fn poisson_potential(f: &Field) -> Field {
    let grid = f.grid();
    let n = grid.len();
    let h = grid.spacing();
    let a = grid.face_areas();
    let vol = grid.weights();
    let x = f.values();
    let mut out = vec![0.0; n];
    out[n - 1] = f.integral() * poisson_kernel(grid.r_max());
    // enclosed[i] = sum_{j <= i} V_j f_j, the flux through face i+1/2
    let mut enclosed = Vec::with_capacity(n - 1);
    let mut acc = 0.0;
    for i in 0..n - 1 {
        acc += vol[i] * x[i];
        enclosed.push(acc);
    }
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] + h * enclosed[i] / a[i];
    }
    Field::new(Arc::clone(grid), out).expect("length preserved")
}

/// `U = (-Lap)^{-1} f` for a nonnegative density `f`.
pub fn poisson_solve(f: &Field) -> Result<Field> {
    f.check_nonnegative()?;
    Ok(poisson_potential(f))
}

/// `int_{|x| > R} |grad U|^2 dx` for the exterior tail `U = M E_4`, where `M = int f`.
pub fn poisson_exterior_energy(total: f64, r_max: f64) -> f64 {
    total * total / (4.0 * PI * PI * r_max * r_max)
}

/// `||grad U||_2^2` over all of R^4 for `U = (-Lap)^{-1} f`: the discrete
/// Dirichlet form inside the ball plus the exact exterior tail.
pub fn poisson_energy(f: &Field, potential: &Field) -> f64 {
    grad_sq(potential) + poisson_exterior_energy(f.integral(), f.grid().r_max())
}

/// Unique decaying solution of `(-d1 Lap + lambda1)(-d2 Lap + lambda2) v = f`.
pub fn biharmonic_factored_solve(f: &Field, params: &Params) -> Result<Field> {
    let inner = helmholtz_solve(f, params.d2, params.lambda2)?;
    helmholtz_solve(&inner, params.d1, params.lambda1)
}

/// Crank-Nicolson approximation of `exp(t (d Lap - lambda)) f` with `substeps`
/// equal steps, each followed by the exact factor `exp(-lambda t / substeps)`.
pub fn heat_semigroup(f: &Field, d: f64, lambda: f64, t: f64, substeps: usize) -> Result<Field> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("semigroup time must be >= 0, got {t}")));
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be >= 1".into()));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    HeatSemigroup::new(f.grid(), d, lambda, t / substeps as f64)?.apply(f, substeps)
}

/// Precomputed Crank-Nicolson step of fixed size for `d Lap - lambda`.
#[derive(Debug, Clone)]
pub struct HeatSemigroup {
    d: f64,
    tau: f64,
    decay: f64,
    implicit: HelmholtzSolver,
}

impl HeatSemigroup {
    pub fn new(grid: &Arc<RadialGrid>, d: f64, lambda: f64, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!("substep must be positive, got {tau}")));
        }
        let implicit = HelmholtzSolver::new(grid, 0.5 * tau * d, 1.0, Closure::Neumann)?;
        Ok(Self {
            d,
            tau,
            decay: (-lambda * tau).exp(),
            implicit,
        })
    }

    pub fn substep(&self) -> f64 {
        self.tau
    }

    /// Applies `steps` substeps.
    pub fn apply(&self, f: &Field, steps: usize) -> Result<Field> {
        let mut x = f.clone();
        for _ in 0..steps {
            let explicit = x.axpy(0.5 * self.tau * self.d, &apply_laplacian4(&x));
            x = self.implicit.solve(&explicit)?.scale(self.decay);
        }
        Ok(x)
    }
}
