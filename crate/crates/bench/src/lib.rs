//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use chemo4d::{build_grid, gaussian_bump, Field, Params, RadialGrid, State};

/// Grid on `[0, 20]` with `n` nodes and a bump of half the boundedness
/// threshold, width 1.
pub fn fixture(n: usize) -> (Arc<RadialGrid>, Params, Field) {
    let grid = build_grid(20.0, n).expect("valid grid");
    let params = Params::unit();
    let u = gaussian_bump(1.0, 0.5 * params.thresholds().m_bounded, &grid).expect("valid bump");
    (grid, params, u)
}

/// State with `v, w` at their quasi-steady values.
pub fn fixture_state(n: usize) -> (State, Params) {
    let (_, params, u) = fixture(n);
    let w = chemo4d::elliptic::helmholtz_solve(&u, params.d2, params.lambda2).expect("solvable");
    let v = chemo4d::elliptic::helmholtz_solve(&w, params.d1, params.lambda1).expect("solvable");
    (State::new(0.0, u, v, w, &params).expect("valid state"), params)
}
