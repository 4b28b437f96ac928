//! Three 1D views of the toolkit for the browser page in `www/`.
//!
//! Each entry point has a plain Rust twin (`*_series`) so the crate builds
//! and tests natively; the `#[wasm_bindgen]` wrappers only convert errors.

use fplap::lattice::{Axis, ExteriorRule, Grid, GridFunction};
use fplap::solver::{solve_ball_power, SolveConfig};
use fplap::symmetry::moving_plane_scan;
use fplap::{KernelParams, Operator, QuadratureConfig};
use wasm_bindgen::prelude::*;

/// A sampled curve plus one headline number.
#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    x: Vec<f64>,
    y: Vec<f64>,
    scalar: f64,
}

#[wasm_bindgen]
impl Series {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn scalar(&self) -> f64 {
        self.scalar
    }
}

fn params(s: f64, p: f64) -> fplap::Result<KernelParams> {
    KernelParams::new(1, s, p, 1.0)
}

fn steps(h: f64) -> fplap::Result<i64> {
    if !(h > 0.0 && h <= 0.25) {
        return Err(fplap::Error::InvalidParams(format!("h must lie in (0, 1/4], got {h}")));
    }
    Ok((1.0 / h).round() as i64)
}

/// `(-Δ)_p^s` of `(1 - x^2)_+^s` on `[-1, 1]`; `scalar` is its value at 0.
pub fn operator_series(s: f64, p: f64, h: f64) -> fplap::Result<Series> {
    let params = params(s, p)?;
    let m = steps(h)?;
    let grid = Grid::cube(1, 1.0 / m as f64, m + m / 2)?;
    let u = GridFunction::from_fn(grid.clone(), ExteriorRule::Zero, |x| (1.0 - x[0] * x[0]).max(0.0).powf(s))?;
    let op = Operator::new(params, QuadratureConfig::default(), &grid)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for k in -m + 1..m {
        let idx = [k, 0, 0];
        x.push(grid.coord(&idx)[0]);
        y.push(op.value(&u, &idx)?);
    }
    let scalar = y[(m - 1) as usize];
    Ok(Series { x, y, scalar })
}

/// Positive solution of `(-Δ)_p^s u = μ u^q` in `(-1, 1)` with `max u = 1`;
/// `scalar` is `μ`.
pub fn ball_series(s: f64, p: f64, q: f64, h: f64) -> fplap::Result<Series> {
    let params = params(s, p)?;
    let grid = Grid::around_unit_ball(1, 1.0 / steps(h)? as f64, 4)?;
    let sol = solve_ball_power(q, &grid, &params, &QuadratureConfig::default(), &SolveConfig::default())?.into_result()?;
    let x = grid.nodes().map(|i| grid.coord(&i)[0]).collect();
    Ok(Series {
        x,
        y: sol.u.values.clone(),
        scalar: sol.mu.unwrap_or(f64::NAN),
    })
}

/// Moving-plane curve `λ ↦ min w_λ` along `-e1` for the tilted bump
/// `(1 - x^2)_+ (1 + tilt x)`; `scalar` is `λ0`.
pub fn plane_series(tilt: f64, h: f64) -> fplap::Result<Series> {
    if !(tilt.abs() < 1.0) {
        return Err(fplap::Error::InvalidParams(format!("tilt must lie in (-1, 1), got {tilt}")));
    }
    let m = steps(h)?;
    let grid = Grid::cube(1, 1.0 / m as f64, m + 2)?;
    let u = GridFunction::from_fn(grid, ExteriorRule::Zero, |x| (1.0 - x[0] * x[0]).max(0.0) * (1.0 + tilt * x[0]))?;
    let scan = moving_plane_scan(&u, Axis::new(0, -1)?)?;
    Ok(Series {
        x: scan.curve.iter().map(|c| c.lambda).collect(),
        y: scan.curve.iter().map(|c| c.min_w).collect(),
        scalar: scan.lambda_0,
    })
}

fn js(e: fplap::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn operator_profile(s: f64, p: f64, h: f64) -> Result<Series, JsError> {
    operator_series(s, p, h).map_err(js)
}

#[wasm_bindgen]
pub fn ball_solve(s: f64, p: f64, q: f64, h: f64) -> Result<Series, JsError> {
    ball_series(s, p, q, h).map_err(js)
}

#[wasm_bindgen]
pub fn plane_curve(tilt: f64, h: f64) -> Result<Series, JsError> {
    plane_series(tilt, h).map_err(js)
}
