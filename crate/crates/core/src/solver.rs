//! Damped nonlinear Jacobi for `(-Δ)_p^s u = f` in the unit ball, the
//! normalized inverse iteration for `(-Δ)_p^s u = μ u^q`, and the truncated
//! whole-space problem `(-Δ)_p^s u = g(u)`.
//!
//! Every sweep reads the previous iterate only. At each unknown node the
//! scalar equation `F_x(t) = f(x)` is solved with the neighbours frozen;
//! `F_x` is strictly increasing, so a bracketing Newton iteration always
//! converges. The new value is `(1 - ω) u(x) + ω t`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{g_apply, KernelParams};
use crate::lattice::{dist2, norm, ExteriorRule, Grid, GridFunction, Idx, Point, MAX_DIM};
use crate::operator::{for_each_offset, Operator, QuadratureConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub max_iters: usize,
    pub tol_residual: f64,
    pub relaxation: f64,
    pub normalization: f64,
    /// Window of the Anderson mixing applied to the sweep map (0 = plain
    /// damped Jacobi).
    pub anderson: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iters: 50_000,
            tol_residual: 1e-6,
            relaxation: 0.5,
            normalization: 1.0,
            anderson: 8,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.tol_residual > 0.0 && self.tol_residual.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "tol_residual must be positive, got {}",
                self.tol_residual
            )));
        }
        if !(self.normalization > 0.0 && self.normalization.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "normalization must be positive, got {}",
                self.normalization
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub u: GridFunction,
    pub residual_history: Vec<f64>,
    /// Jacobi sweeps summed over inner solves, plus residual evaluations
    /// in Newton phases.
    pub iterations: usize,
    pub converged: bool,
    /// Scale factor of `(-Δ)_p^s u = μ u^q`, or the amplitude of a
    /// whole-space solution.
    pub mu: Option<f64>,
}

/// Sidecar written next to a solution file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionSidecar {
    pub mu: Option<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

impl Solution {
    pub fn sidecar(&self) -> SolutionSidecar {
        SolutionSidecar {
            mu: self.mu,
            iterations: self.iterations,
            residual_history: self.residual_history.clone(),
            converged: self.converged,
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }

    /// `Err(NotConverged)` unless converged.
    pub fn into_result(self) -> Result<Solution> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.final_residual(),
            })
        }
    }
}

#[inline]
fn g_deriv(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if p == 3.0 {
        2.0 * t.abs()
    } else if t == 0.0 {
        if p > 2.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (p - 1.0) * t.abs().powf(p - 2.0)
    }
}

/// Contribution of everything beyond the box at one node, as a function of
/// the node value `t`.
#[derive(Clone, Debug)]
enum Outside {
    /// `w0 G(t)`: nodes and continuum where the function vanishes.
    Zero,
    /// Explicit lattice nodes `(w, e)` plus the continuum tail, which is
    /// `B t - c` when `p = 2`.
    Decay {
        nodes: Vec<(f64, f64)>,
        linear_tail: Option<f64>,
    },
}

/// The family of scalar node equations on a fixed set of unknowns.
struct NodeSystem<'a> {
    op: &'a Operator,
    grid: Grid,
    /// Flat indices of the unknowns.
    active: Vec<usize>,
    idx: Vec<Idx>,
    /// Weight of zero-valued nodes and continuum, per unknown.
    zero_weight: Vec<f64>,
    outside: Vec<Outside>,
    exterior: ExteriorRule,
    /// `κ` in `(-Δ)_p^s u + κ u`.
    shift: f64,
}

impl<'a> NodeSystem<'a> {
    /// Unknowns at `active`; every other box node is held at zero and the
    /// exterior is Zero.
    fn dirichlet(op: &'a Operator, grid: &Grid, active: Vec<usize>) -> Result<Self> {
        let idx: Vec<Idx> = active.iter().map(|&k| grid.unflat(k)).collect();
        for i in &idx {
            let r = grid.circumradius_from(&grid.coord(i));
            if r > op.tail_radius() * (1.0 + 1e-12) {
                return Err(Error::TailRadiusTooSmall {
                    tail_radius: op.tail_radius(),
                    required: r,
                });
            }
        }
        let zero_weight = idx
            .par_iter()
            .map(|x| {
                let inside: f64 = idx.iter().map(|y| op.weight(dist2(x, y))).sum();
                op.lattice_total() - inside + op.ball_tail()
            })
            .collect();
        let m = idx.len();
        Ok(NodeSystem {
            op,
            grid: grid.clone(),
            active,
            idx,
            zero_weight,
            outside: vec![Outside::Zero; m],
            exterior: ExteriorRule::Zero,
            shift: 0.0,
        })
    }

    /// Every box node is unknown; beyond the box the values follow `exterior`.
    fn whole_box(op: &'a Operator, grid: &Grid, exterior: &ExteriorRule, shift: f64) -> Result<Self> {
        let active: Vec<usize> = (0..grid.len()).collect();
        let idx: Vec<Idx> = active.iter().map(|&k| grid.unflat(k)).collect();
        let p = op.params.p;
        let k_max = op.k_max();
        let r = (k_max as f64).sqrt().floor() as i64;
        let n = grid.n;
        let built: Vec<(f64, Outside)> = idx
            .par_iter()
            .map(|x| {
                let xp = grid.coord(x);
                if let Some(e) = exterior.constant_value() {
                    // constant exteriors only arise with e = 0 here
                    debug_assert_eq!(e, 0.0);
                    let inside: f64 = idx.iter().map(|y| op.weight(dist2(x, y))).sum();
                    return (op.lattice_total() - inside + op.ball_tail(), Outside::Zero);
                }
                let mut nodes = Vec::new();
                for_each_offset(n, r, |z| {
                    let d2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
                    if d2 == 0 || d2 > k_max {
                        return;
                    }
                    let y = [x[0] + z[0], x[1] + z[1], x[2] + z[2]];
                    if grid.contains(&y) {
                        return;
                    }
                    nodes.push((op.weight(d2), exterior.value_at(&grid.coord(&y))));
                });
                let linear_tail = (p == 2.0).then(|| -op.continuum_tail(exterior, &xp, 0.0));
                (0.0, Outside::Decay { nodes, linear_tail })
            })
            .collect();
        let (zero_weight, outside) = built.into_iter().unzip();
        Ok(NodeSystem {
            op,
            grid: grid.clone(),
            active,
            idx,
            zero_weight,
            outside,
            exterior: exterior.clone(),
            shift,
        })
    }

    fn len(&self) -> usize {
        self.active.len()
    }

    /// `F_x(t)` and a derivative estimate for unknown number `a`.
    fn eval(&self, a: usize, t: f64, values: &[f64]) -> (f64, f64) {
        let p = self.op.params.p;
        let x = &self.idx[a];
        let mut f = 0.0;
        let mut d = 0.0;
        for (b, y) in self.idx.iter().enumerate() {
            if b == a {
                continue;
            }
            let w = self.op.weight(dist2(x, y));
            let arg = t - values[self.active[b]];
            f += w * g_apply(arg, p);
            d += w * g_deriv(arg, p);
        }
        f += self.zero_weight[a] * g_apply(t, p);
        d += self.zero_weight[a] * g_deriv(t, p);
        if let Outside::Decay { nodes, linear_tail } = &self.outside[a] {
            for (w, e) in nodes {
                f += w * g_apply(t - e, p);
                d += w * g_deriv(t - e, p);
            }
            let b = self.op.ball_tail();
            match linear_tail {
                Some(c) => f += b * t - c,
                None => f += self.op.continuum_tail(&self.exterior, &self.grid.coord(x), t),
            }
            d += b * g_deriv(t, p);
        }
        let c = self.op.params.c;
        (c * f + self.shift * t, c * d + self.shift)
    }

    /// Closed form for `p = 2`: `F_x(t) = α t - β`.
    fn linear_coeffs(&self, a: usize, values: &[f64]) -> (f64, f64) {
        let x = &self.idx[a];
        let mut alpha = self.zero_weight[a];
        let mut beta = 0.0;
        for (b, y) in self.idx.iter().enumerate() {
            if b == a {
                continue;
            }
            let w = self.op.weight(dist2(x, y));
            alpha += w;
            beta += w * values[self.active[b]];
        }
        if let Outside::Decay { nodes, linear_tail } = &self.outside[a] {
            for (w, e) in nodes {
                alpha += w;
                beta += w * e;
            }
            alpha += self.op.ball_tail();
            beta += linear_tail.expect("linear tail is set for p = 2");
        }
        let c = self.op.params.c;
        (c * alpha + self.shift, c * beta)
    }

    /// `∂F_x / ∂u_x` at `values`.
    fn diagonal(&self, values: &[f64]) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|a| {
                if self.op.params.p == 2.0 {
                    self.linear_coeffs(a, values).0
                } else {
                    self.eval(a, values[self.active[a]], values).1
                }
            })
            .collect()
    }

    /// Residuals `F_x(u_x) - rhs_x` without updating.
    fn residuals(&self, values: &[f64], rhs: &[f64]) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|a| {
                let t = values[self.active[a]];
                let f = if self.op.params.p == 2.0 {
                    let (al, be) = self.linear_coeffs(a, values);
                    al * t - be
                } else {
                    self.eval(a, t, values).0
                };
                f - rhs[a]
            })
            .collect()
    }

    /// One damped Jacobi sweep; returns the new values and the residuals of
    /// the old ones.
    fn sweep(&self, values: &[f64], rhs: &[f64], omega: f64, ftol: f64) -> (Vec<f64>, Vec<f64>) {
        let out: Vec<(f64, f64)> = (0..self.len())
            .into_par_iter()
            .map(|a| {
                let t0 = values[self.active[a]];
                if self.op.params.p == 2.0 {
                    let (al, be) = self.linear_coeffs(a, values);
                    let t = (rhs[a] + be) / al;
                    return ((1.0 - omega) * t0 + omega * t, al * t0 - be - rhs[a]);
                }
                let (t, r0) = self.scalar_solve(a, t0, rhs[a], values, ftol);
                ((1.0 - omega) * t0 + omega * t, r0)
            })
            .collect();
        let mut new = values.to_vec();
        let mut res = Vec::with_capacity(out.len());
        for (a, (v, r)) in out.into_iter().enumerate() {
            new[self.active[a]] = v;
            res.push(r);
        }
        (new, res)
    }

    /// Solves `F_x(t) = target` by Newton steps kept inside an expanding
    /// bracket. Returns the root and the residual at `t0`.
    fn scalar_solve(&self, a: usize, t0: f64, target: f64, values: &[f64], ftol: f64) -> (f64, f64) {
        let (f0, d0) = self.eval(a, t0, values);
        let r0 = f0 - target;
        if r0.abs() <= ftol {
            return (t0, r0);
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(t0.abs()).max(1e-12);
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let (mut t, mut r, mut d) = (t0, r0, d0);
        let mut step = scale * 1e-3;
        for _ in 0..200 {
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = if d.is_finite() && d > 0.0 { t - r / d } else { f64::NAN };
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                step *= 2.0;
                if r > 0.0 {
                    t - step.max((r / d).abs().min(scale))
                } else {
                    t + step.max((r / d).abs().min(scale))
                }
            };
            if (next - t).abs() <= 1e-15 * (t.abs() + scale) {
                return (next, r0);
            }
            t = next;
            let (f, dd) = self.eval(a, t, values);
            r = f - target;
            d = dd;
            if r.abs() <= ftol {
                return (t, r0);
            }
        }
        (t, r0)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Runs damped Jacobi sweeps from `values` until the relative residual drops
/// below `tol`, mixing the last `cfg.anderson` sweep outputs. With
/// `positive`, mixed iterates that leave the positive cone are replaced by
/// the plain sweep output, and a non-positive sweep output is an error.
#[allow(clippy::too_many_arguments)]
fn jacobi(
    sys: &NodeSystem,
    mut values: Vec<f64>,
    rhs: &[f64],
    cfg: &SolveConfig,
    tol: f64,
    max_sweeps: usize,
    history: &mut Vec<f64>,
    positive: bool,
) -> Result<(Vec<f64>, usize, bool)> {
    let fscale = max_abs(rhs).max(1e-300);
    let ftol = 1e-4 * tol * fscale;
    let act = &sys.active;
    let mut best = (f64::INFINITY, values.clone());
    let mut mixer = Anderson::new(cfg.anderson);
    for it in 0..max_sweeps {
        let (swept, res) = sys.sweep(&values, rhs, cfg.relaxation, ftol);
        let rel = max_abs(&res) / fscale;
        history.push(rel);
        if rel < best.0 {
            best = (rel, values.clone());
        }
        if rel <= tol {
            return Ok((values, it + 1, true));
        }
        let x: Vec<f64> = act.iter().map(|&k| values[k]).collect();
        let gx: Vec<f64> = act.iter().map(|&k| swept[k]).collect();
        if positive {
            if let Some(a) = gx.iter().position(|v| *v <= 0.0) {
                return Err(Error::NonPositiveIterate {
                    node: sys.idx[a][..sys.grid.n].to_vec(),
                    iteration: it + 1,
                });
            }
        }
        let mut next = mixer.step(&x, &gx);
        if positive && next.iter().any(|v| *v <= 0.0) {
            mixer.clear();
            next = gx;
        }
        for (a, &k) in act.iter().enumerate() {
            values[k] = next[a];
        }
    }
    // one more residual for the final iterate
    let res = sys.residuals(&values, rhs);
    let rel = max_abs(&res) / fscale;
    history.push(rel);
    if rel <= tol {
        return Ok((values, max_sweeps, true));
    }
    if rel < best.0 {
        best = (rel, values);
    }
    Ok((best.1, max_sweeps, false))
}

/// Anderson mixing of a fixed-point map `x -> g(x)` with a finite window.
struct Anderson {
    depth: usize,
    df: std::collections::VecDeque<Vec<f64>>,
    dg: std::collections::VecDeque<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson {
            depth,
            df: Default::default(),
            dg: Default::default(),
            last: None,
        }
    }

    fn clear(&mut self) {
        self.df.clear();
        self.dg.clear();
        self.last = None;
    }

    fn step(&mut self, x: &[f64], gx: &[f64]) -> Vec<f64> {
        if self.depth == 0 {
            return gx.to_vec();
        }
        let f: Vec<f64> = gx.iter().zip(x).map(|(g, x)| g - x).collect();
        if let Some((pf, pg)) = self.last.take() {
            self.df.push_back(f.iter().zip(&pf).map(|(a, b)| a - b).collect());
            self.dg.push_back(gx.iter().zip(&pg).map(|(a, b)| a - b).collect());
            if self.df.len() > self.depth {
                self.df.pop_front();
                self.dg.pop_front();
            }
        }
        self.last = Some((f.clone(), gx.to_vec()));
        let m = self.df.len();
        if m == 0 {
            return gx.to_vec();
        }
        // normal equations of min |f - dF γ|, lightly regularized
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut a = vec![vec![0.0; m + 1]; m];
        for i in 0..m {
            for j in 0..=i {
                let v = dot(&self.df[i], &self.df[j]);
                a[i][j] = v;
                a[j][i] = v;
            }
            a[i][m] = dot(&self.df[i], &f);
        }
        let reg = 1e-12 * (0..m).map(|i| a[i][i]).fold(0.0, f64::max);
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += reg;
        }
        let gamma = match solve_dense(a) {
            Some(g) => g,
            None => {
                self.clear();
                return gx.to_vec();
            }
        };
        let mut out = gx.to_vec();
        for (j, gj) in gamma.iter().enumerate() {
            for (o, d) in out.iter_mut().zip(&self.dg[j]) {
                *o -= gj * d;
            }
        }
        out
    }
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for c in 0..m {
        let piv = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, piv);
        for r in c + 1..m {
            let f = a[r][c] / a[c][c];
            for k in c..=m {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let mut v = a[r][m];
        for k in r + 1..m {
            v -= a[r][k] * x[k];
        }
        x[r] = v / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Flat indices of the nodes strictly inside the unit ball.
fn ball_nodes(grid: &Grid) -> Vec<usize> {
    (0..grid.len())
        .filter(|&k| norm(&grid.coord(&grid.unflat(k))) < 1.0)
        .collect()
}

fn check_ball_grid(op: &Operator, grid: &Grid) -> Result<()> {
    let margin = op.config.near_radius * grid.h;
    for d in 0..grid.n {
        let (lo, hi) = grid.extent[d];
        if (lo as f64) * grid.h > -1.0 - margin + 1e-12 || (hi as f64) * grid.h < 1.0 + margin - 1e-12 {
            return Err(Error::Grid(format!(
                "the box must contain the unit ball plus a margin of {margin}"
            )));
        }
    }
    Ok(())
}

/// Solves `(-Δ)_p^s u = f` in `B_1`, `u = 0` outside, starting from zero.
pub fn solve_dirichlet_rhs(
    f: &GridFunction,
    params: &KernelParams,
    q: &QuadratureConfig,
    cfg: &SolveConfig,
) -> Result<Solution> {
    let op = Operator::new(*params, q.clone(), &f.grid)?;
    let init = GridFunction::zeros(f.grid.clone());
    solve_dirichlet_rhs_from(&op, f, &init, cfg)
}

/// As [`solve_dirichlet_rhs`] with an explicit operator and initial guess.
pub fn solve_dirichlet_rhs_from(
    op: &Operator,
    f: &GridFunction,
    init: &GridFunction,
    cfg: &SolveConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if !f.exterior.is_zero() {
        return Err(Error::Grid("the right-hand side needs a Zero exterior".into()));
    }
    if init.grid != f.grid {
        return Err(Error::Grid("initial guess and right-hand side live on different grids".into()));
    }
    check_ball_grid(op, &f.grid)?;
    let sys = NodeSystem::dirichlet(op, &f.grid, ball_nodes(&f.grid))?;
    let rhs: Vec<f64> = sys.active.iter().map(|&k| f.values[k]).collect();
    let mut values = vec![0.0; f.grid.len()];
    for &k in &sys.active {
        values[k] = init.values[k];
    }
    let mut history = Vec::new();
    let (values, iterations, converged) = jacobi(
        &sys,
        values,
        &rhs,
        cfg,
        cfg.tol_residual,
        cfg.max_iters,
        &mut history,
        false,
    )?;
    Ok(Solution {
        u: GridFunction::new(f.grid.clone(), values, ExteriorRule::Zero)?,
        residual_history: history,
        iterations,
        converged,
        mu: None,
    })
}

/// The radial bump `(1 - |x - c|^2)_+^s` scaled to `amplitude`.
pub fn initial_bump(grid: &Grid, s: f64, amplitude: f64, center: &Point) -> GridFunction {
    let values = grid
        .nodes()
        .map(|i| {
            let x = grid.coord(&i);
            let mut r2 = 0.0;
            for d in 0..MAX_DIM {
                r2 += (x[d] - center[d]).powi(2);
            }
            amplitude * (1.0 - r2).max(0.0).powf(s)
        })
        .collect();
    GridFunction {
        grid: grid.clone(),
        values,
        exterior: ExteriorRule::Zero,
    }
}

/// Positive solution of `(-Δ)_p^s u = μ u^q` in `B_1` with `max u` fixed to
/// `cfg.normalization`, by inverse iteration `v = L^{-1}(u^q)`,
/// `u = normalization · v / max v`, with `μ = (normalization / max v)^{p-1}`.
pub fn solve_ball_power(
    q_exp: f64,
    grid: &Grid,
    params: &KernelParams,
    q: &QuadratureConfig,
    cfg: &SolveConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if !(q_exp > 0.0 && q_exp.is_finite()) {
        return Err(Error::InvalidParams(format!("exponent q must be positive, got {q_exp}")));
    }
    let op = Operator::new(*params, q.clone(), grid)?;
    check_ball_grid(&op, grid)?;
    let sys = NodeSystem::dirichlet(&op, grid, ball_nodes(grid))?;
    let p = params.p;
    let norm_c = cfg.normalization;
    let mut u = initial_bump(grid, params.s, norm_c, &[0.0; MAX_DIM]).values;
    let mut mu = f64::NAN;
    let mut history = Vec::new();
    let mut sweeps = 0usize;
    let mut converged = false;
    let mut v = u.clone();
    while sweeps < cfg.max_iters {
        let rhs: Vec<f64> = sys.active.iter().map(|&k| u[k].powf(q_exp)).collect();
        if mu.is_finite() {
            // warm start: if L u = μ u^q then L(c u) = u^q for c = μ^{-1/(p-1)}
            let c = mu.powf(-1.0 / (p - 1.0));
            v = u.iter().map(|x| c * x).collect();
        }
        let mut inner = Vec::new();
        let budget = cfg.max_iters - sweeps;
        let (nv, used, ok) = jacobi(&sys, v, &rhs, cfg, 0.5 * cfg.tol_residual, budget, &mut inner, true)?;
        sweeps += used;
        v = nv;
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(m > 0.0) {
            return Err(Error::NonPositiveIterate {
                node: vec![],
                iteration: sweeps,
            });
        }
        let new_u: Vec<f64> = v.iter().map(|x| norm_c * x / m).collect();
        mu = (norm_c / m).powf(p - 1.0);
        let change = new_u
            .iter()
            .zip(&u)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
            / norm_c;
        u = new_u;
        // residual of L u = μ u^q at the new iterate
        let rhs_mu: Vec<f64> = sys.active.iter().map(|&k| mu * u[k].powf(q_exp)).collect();
        let res = sys.residuals(&u, &rhs_mu);
        let rel = max_abs(&res) / max_abs(&rhs_mu).max(1e-300);
        history.push(rel);
        if ok && change <= cfg.tol_residual && rel <= cfg.tol_residual {
            converged = true;
            break;
        }
    }
    Ok(Solution {
        u: GridFunction::new(grid.clone(), u, ExteriorRule::Zero)?,
        residual_history: history,
        iterations: sweeps,
        converged,
        mu: mu.is_finite().then_some(mu),
    })
}

/// Scalar nonlinearity `g` with its derivative.
pub trait Nonlinearity: Sync {
    fn value(&self, u: f64) -> f64;
    fn derivative(&self, u: f64) -> f64;
}

/// Closed-form nonlinearities accepted in configuration files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ScalarMap {
    Zero,
    /// `u^q - u` (for `u ≥ 0`).
    PowerMinusLinear { q: f64 },
    /// `u^q`.
    Power { q: f64 },
}

impl Nonlinearity for ScalarMap {
    fn value(&self, u: f64) -> f64 {
        let up = u.max(0.0);
        match *self {
            ScalarMap::Zero => 0.0,
            ScalarMap::PowerMinusLinear { q } => up.powf(q) - u,
            ScalarMap::Power { q } => up.powf(q),
        }
    }

    fn derivative(&self, u: f64) -> f64 {
        let up = u.max(0.0);
        match *self {
            ScalarMap::Zero => 0.0,
            ScalarMap::PowerMinusLinear { q } => q * up.powf(q - 1.0) - 1.0,
            ScalarMap::Power { q } => q * up.powf(q - 1.0),
        }
    }
}

/// Fitted exterior `A |x - c|^{-α}` and the worst relative misfit on the
/// outer shell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub alpha: f64,
    pub center: Vec<f64>,
    pub misfit: f64,
}

/// Least-squares fit of `log u = log A - α log |x - c|` over the nodes within
/// a quarter of the half-width from the box edge; fails when the fit misses
/// a shell value by more than 5%.
pub fn fit_decay(u: &GridFunction, center: &Point) -> Result<DecayFit> {
    let fit = fit_decay_unchecked(u, center)?;
    if fit.misfit > 0.05 {
        return Err(Error::DecayFitFailed { misfit: fit.misfit });
    }
    Ok(fit)
}

fn fit_decay_unchecked(u: &GridFunction, center: &Point) -> Result<DecayFit> {
    let grid = &u.grid;
    let half_width = grid
        .extent
        .iter()
        .map(|&(lo, hi)| (hi - lo) as f64 * grid.h / 2.0)
        .fold(f64::INFINITY, f64::min);
    let mut pts = Vec::new();
    for (k, &v) in u.values.iter().enumerate() {
        let i = grid.unflat(k);
        if grid.distance_to_edge(&i) > 0.25 * half_width + 1e-12 {
            continue;
        }
        let x = grid.coord(&i);
        let mut r2 = 0.0;
        for d in 0..MAX_DIM {
            r2 += (x[d] - center[d]).powi(2);
        }
        if v <= 0.0 || r2 == 0.0 {
            return Err(Error::DecayFitFailed {
                misfit: f64::INFINITY,
            });
        }
        pts.push((0.5 * r2.ln(), v.ln(), v, r2.sqrt()));
    }
    if pts.len() < 2 {
        return Err(Error::DecayFitFailed {
            misfit: f64::INFINITY,
        });
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (sxx, sxy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx).powi(2), b + (p.0 - mx) * (p.1 - my)));
    if sxx <= 0.0 {
        return Err(Error::DecayFitFailed {
            misfit: f64::INFINITY,
        });
    }
    let slope = sxy / sxx;
    let alpha = -slope;
    let amplitude = (my - slope * mx).exp();
    let misfit = pts
        .iter()
        .map(|p| (amplitude * p.3.powf(-alpha) - p.2).abs() / p.2)
        .fold(0.0, f64::max);
    if !(alpha > 0.0) {
        return Err(Error::DecayFitFailed { misfit });
    }
    Ok(DecayFit {
        amplitude,
        alpha,
        center: center.to_vec(),
        misfit,
    })
}

/// Node of the maximum value, ties to the lexicographically smallest index.
pub fn argmax_node(u: &GridFunction) -> Idx {
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (k, &v) in u.values.iter().enumerate() {
        if v > best.0 {
            best = (v, k);
        }
    }
    u.grid.unflat(best.1)
}

/// Options of the whole-space solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WholeSpaceConfig {
    /// Half-width `L` of the box `[-L, L]^n`.
    pub box_l: f64,
    pub h: f64,
    /// Center of the initial bump.
    pub initial_center: Vec<f64>,
}

impl Default for WholeSpaceConfig {
    fn default() -> Self {
        WholeSpaceConfig {
            box_l: 4.0,
            h: 1.0 / 64.0,
            initial_center: vec![0.0; MAX_DIM],
        }
    }
}

/// Shape steps with a Zero exterior before the Newton phase.
const PRELUDE_STEPS: usize = 30;
/// Krylov vectors per Newton step.
const KRYLOV_DIM: usize = 200;

/// `(-Δ)_p^s u = g(u)` on `[-L, L]^n` with a power-decay exterior fitted to
/// the outer shell.
///
/// A short prelude with a Zero exterior iterates the shape,
/// `L v + κ v = g(a u) + κ a u`, `u = v / max v`, with `κ = max(0, -g'(0))`
/// and the amplitude `a` balancing `a^{p-1} <L u, u> = <g(a u), u>`. The
/// fitted exterior is then switched on and the full system, shell fit
/// included, is solved by Jacobian-free Newton steps with diagonally
/// preconditioned GMRES. Iterating the shape with the fitted exterior
/// instead drifts to the constant root of `g`.
pub fn solve_whole_space(
    g: &dyn Nonlinearity,
    params: &KernelParams,
    q: &QuadratureConfig,
    cfg: &SolveConfig,
    ws: &WholeSpaceConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if !(ws.box_l > 0.0 && ws.h > 0.0 && ws.box_l > 8.0 * ws.h) {
        return Err(Error::InvalidParams(format!(
            "box half-width {} too small for h = {}",
            ws.box_l, ws.h
        )));
    }
    let n = params.n;
    let grid = Grid::with_half_width(n, ws.h, ws.box_l)?;
    let op = Operator::new(*params, q.clone(), &grid)?;
    let p = params.p;
    let shift = (-g.derivative(0.0)).max(0.0);
    let shape_of = |values: &[f64]| GridFunction {
        grid: grid.clone(),
        values: values.to_vec(),
        exterior: ExteriorRule::Zero,
    };

    let mut center = [0.0; MAX_DIM];
    for (d, c) in ws.initial_center.iter().take(n).enumerate() {
        center[d] = *c;
    }
    // initial shape: a bump with an algebraic tail so the shell is positive
    let mut u: Vec<f64> = grid
        .nodes()
        .map(|i| {
            let x = grid.coord(&i);
            let mut r2 = 0.0;
            for d in 0..MAX_DIM {
                r2 += (x[d] - center[d]).powi(2);
            }
            (1.0 + r2).powf(-(n as f64 + params.sp()) / 2.0)
        })
        .collect();
    let mut history = Vec::new();
    let mut evals = 0usize;

    let sys_l = NodeSystem::whole_box(&op, &grid, &ExteriorRule::Zero, 0.0)?;
    let sys_shift = NodeSystem::whole_box(&op, &grid, &ExteriorRule::Zero, shift)?;
    let zeros = vec![0.0; u.len()];
    let mut amp = 1.0;
    for _ in 0..PRELUDE_STEPS {
        let lu = sys_l.residuals(&u, &zeros);
        let lu_u: f64 = lu.iter().zip(&u).map(|(a, b)| a * b).sum();
        amp = balance_amplitude(g, &u, lu_u, p, amp);
        if amp == 0.0 {
            // only the trivial solution balances
            let c = grid.coord(&argmax_node(&shape_of(&u)));
            return Ok(Solution {
                u: GridFunction::new(grid.clone(), zeros, ExteriorRule::power_decay_about(0.0, 1.0, c)?)?,
                residual_history: vec![0.0],
                iterations: evals,
                converged: true,
                mu: Some(0.0),
            });
        }
        let big: Vec<f64> = u.iter().map(|x| amp * x).collect();
        let rhs: Vec<f64> = big.iter().map(|&x| g.value(x) + shift * x).collect();
        let mut inner = Vec::new();
        let budget = cfg.max_iters.saturating_sub(evals).max(1);
        let (v, used, _) = jacobi(&sys_shift, big, &rhs, cfg, 1e-3, budget, &mut inner, false)?;
        evals += used;
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(m > 0.0) {
            return Err(Error::NonPositiveIterate {
                node: vec![],
                iteration: evals,
            });
        }
        u = v.iter().map(|x| x / m).collect();
    }

    let residual = |values: &[f64], c: &Point| -> Result<(Vec<f64>, Vec<f64>, DecayFit)> {
        let fit = fit_decay_unchecked(&shape_of(values), c)?;
        let ext = ExteriorRule::power_decay_about(fit.amplitude, fit.alpha, *c)?;
        let sys = NodeSystem::whole_box(&op, &grid, &ext, 0.0)?;
        let gu: Vec<f64> = values.iter().map(|&x| g.value(x)).collect();
        Ok((sys.residuals(values, &gu), gu, fit))
    };
    let mut x: Vec<f64> = u.iter().map(|v| amp * v).collect();
    let mut converged = false;
    let mut fit;
    loop {
        let c = grid.coord(&argmax_node(&shape_of(&x)));
        let (f, gu, fx) = residual(&x, &c)?;
        evals += 1;
        fit = fx;
        let rel = max_abs(&f) / max_abs(&gu).max(1e-300);
        history.push(rel);
        if rel <= cfg.tol_residual {
            converged = true;
            break;
        }
        if evals >= cfg.max_iters {
            break;
        }
        let ext = ExteriorRule::power_decay_about(fit.amplitude, fit.alpha, c)?;
        let diag: Vec<f64> = NodeSystem::whole_box(&op, &grid, &ext, 0.0)?
            .diagonal(&x)
            .iter()
            .zip(&x)
            .map(|(d, &v)| {
                let j = d - g.derivative(v);
                if j.abs() > 1e-300 { 1.0 / j } else { 1.0 }
            })
            .collect();
        let fnorm = norm2(&f);
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let budget = KRYLOV_DIM.min(cfg.max_iters - evals);
        let mut jv = |v: &[f64]| -> Result<Vec<f64>> {
            let eps = 1e-7 * (1.0 + norm2(&x)) / norm2(v).max(1e-300);
            let xe: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + eps * b).collect();
            evals += 1;
            let (fe, _, _) = residual(&xe, &c)?;
            Ok(fe.iter().zip(&f).map(|(a, b)| (a - b) / eps).collect())
        };
        let dx = gmres(&mut jv, &neg, &diag, 1e-3, budget.max(1))?;
        // backtracking on |F|
        let mut t = 1.0;
        let mut accepted = false;
        while t >= 1.0 / 1024.0 {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
            evals += 1;
            if let Ok((ft, _, _)) = residual(&xt, &c) {
                if norm2(&ft) < (1.0 - 1e-4 * t) * fnorm {
                    x = xt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    if fit.misfit > 0.05 {
        return Err(Error::DecayFitFailed { misfit: fit.misfit });
    }
    let c = grid.coord(&argmax_node(&shape_of(&x)));
    let exterior = ExteriorRule::power_decay_about(fit.amplitude, fit.alpha, c)?;
    let mu = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Solution {
        u: GridFunction::new(grid, x, exterior)?,
        residual_history: history,
        iterations: evals,
        converged,
        mu: Some(mu),
    })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// GMRES for `A x = b`, right-preconditioned by the diagonal `m_inv`, from
/// `x = 0`, stopping at relative residual `tol` or after `max_iter` steps.
fn gmres(
    apply: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    m_inv: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let beta = norm2(b);
    let mut x = vec![0.0; b.len()];
    if beta == 0.0 {
        return Ok(x);
    }
    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|v| v / beta).collect()];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut rhs = vec![beta];
    for j in 0..max_iter {
        let z: Vec<f64> = basis[j].iter().zip(m_inv).map(|(a, m)| a * m).collect();
        let mut w = apply(&z)?;
        let mut hcol = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(v).for_each(|(a, b)| *a -= hij * b);
            hcol[i] = hij;
        }
        let wn = norm2(&w);
        hcol[j + 1] = wn;
        for i in 0..j {
            let t = cs[i] * hcol[i] + sn[i] * hcol[i + 1];
            hcol[i + 1] = -sn[i] * hcol[i] + cs[i] * hcol[i + 1];
            hcol[i] = t;
        }
        let r = hcol[j].hypot(hcol[j + 1]);
        let (c, s) = if r > 0.0 { (hcol[j] / r, hcol[j + 1] / r) } else { (1.0, 0.0) };
        hcol[j] = r;
        hcol[j + 1] = 0.0;
        rhs.push(-s * rhs[j]);
        rhs[j] *= c;
        cs.push(c);
        sn.push(s);
        cols.push(hcol);
        if rhs[j + 1].abs() <= tol * beta || wn == 0.0 {
            break;
        }
        basis.push(w.iter().map(|v| v / wn).collect());
    }
    let k = cols.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = rhs[i];
        for l in i + 1..k {
            acc -= cols[l][i] * y[l];
        }
        y[i] = acc / cols[i][i];
    }
    for (yi, v) in y.iter().zip(&basis) {
        x.iter_mut().zip(v).for_each(|(a, b)| *a += yi * b);
    }
    Ok(x.iter().zip(m_inv).map(|(a, m)| a * m).collect())
}

/// Root `a > 0` of `a^{p-1} lu_u - <g(a u), u>`, or 0 when there is none.
fn balance_amplitude(g: &dyn Nonlinearity, u: &[f64], lu_u: f64, p: f64, guess: f64) -> f64 {
    let phi = |a: f64| {
        let gu: f64 = u.iter().map(|&x| g.value(a * x) * x).sum();
        a.powf(p - 1.0) * lu_u - gu
    };
    // phi < 0 for small a when g(u) > L-growth near 0 fails; bracket by scanning
    let mut lo = f64::NAN;
    let mut hi = f64::NAN;
    let mut a = guess.max(1e-6) / 1024.0;
    let mut prev = phi(a);
    for _ in 0..80 {
        let b = a * 2.0;
        let cur = phi(b);
        if prev.signum() != cur.signum() {
            lo = a;
            hi = b;
            break;
        }
        a = b;
        prev = cur;
    }
    if !lo.is_finite() {
        return 0.0;
    }
    let flo = phi(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = phi(mid);
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs_gives_zero() {
        let grid = Grid::around_unit_ball(1, 1.0 / 32.0, 4).unwrap();
        let f = GridFunction::zeros(grid);
        let params = KernelParams::new(1, 0.5, 3.0, 1.0).unwrap();
        let sol = solve_dirichlet_rhs(&f, &params, &QuadratureConfig::default(), &SolveConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn residual_certificate_p3() {
        let grid = Grid::around_unit_ball(1, 1.0 / 32.0, 4).unwrap();
        let f = GridFunction::from_fn(grid.clone(), ExteriorRule::Zero, |x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let params = KernelParams::new(1, 0.5, 3.0, 1.0).unwrap();
        let q = QuadratureConfig::default();
        let cfg = SolveConfig::default();
        let sol = solve_dirichlet_rhs(&f, &params, &q, &cfg).unwrap();
        assert!(sol.converged, "{:?}", sol.residual_history.last());
        let op = Operator::new(params, q, &grid).unwrap();
        let mut worst: f64 = 0.0;
        for k in ball_nodes(&grid) {
            let x = grid.unflat(k);
            worst = worst.max((op.value(&sol.u, &x).unwrap() - f.values[k]).abs());
        }
        assert!(worst <= 2.0 * cfg.tol_residual, "{worst}");
    }

    #[test]
    fn max_iters_one_reports_not_converged() {
        let grid = Grid::around_unit_ball(1, 1.0 / 16.0, 4).unwrap();
        let f = GridFunction::from_fn(grid, ExteriorRule::Zero, |x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let params = KernelParams::new(1, 0.5, 2.0, 1.0).unwrap();
        let cfg = SolveConfig {
            max_iters: 1,
            ..Default::default()
        };
        let sol = solve_dirichlet_rhs(&f, &params, &QuadratureConfig::default(), &cfg).unwrap();
        assert!(!sol.converged);
        assert!(matches!(sol.into_result(), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn decay_fit_recovers_power_law() {
        let grid = Grid::with_half_width(1, 1.0 / 16.0, 4.0).unwrap();
        let u = GridFunction::from_fn(grid, ExteriorRule::Zero, |x| 3.0 * (x[0].abs().max(0.5)).powf(-2.0)).unwrap();
        let fit = fit_decay(&u, &[0.0; MAX_DIM]).unwrap();
        assert!((fit.alpha - 2.0).abs() < 1e-10 && (fit.amplitude - 3.0).abs() < 1e-9);
    }

    #[test]
    fn amplitude_balance_closed_form() {
        // p = 2, g = u^3 - u: a^2 = (<Lu,u> + <u,u>) / <u^4, 1>
        let u = [0.2, 1.0, 0.5];
        let g = ScalarMap::PowerMinusLinear { q: 3.0 };
        let lu_u = 0.7;
        let a = balance_amplitude(&g, &u, lu_u, 2.0, 1.0);
        let uu: f64 = u.iter().map(|x| x * x).sum();
        let u4: f64 = u.iter().map(|x| x.powi(4)).sum();
        assert!((a * a - (lu_u + uu) / u4).abs() < 1e-12);
    }

    #[test]
    fn whole_space_recovers_soliton() {
        // with C = 1/π, (-Δ)^{1/2} u + u = u^2 is solved by 2 / (1 + x^2)
        let params = KernelParams::new(1, 0.5, 2.0, std::f64::consts::FRAC_1_PI).unwrap();
        let ws = WholeSpaceConfig {
            h: 1.0 / 16.0,
            ..Default::default()
        };
        let g = ScalarMap::PowerMinusLinear { q: 2.0 };
        let sol = solve_whole_space(&g, &params, &QuadratureConfig::default(), &SolveConfig::default(), &ws).unwrap();
        assert!(sol.converged);
        let peak = sol.u.max_value();
        assert!((peak - 2.0).abs() < 5e-3, "{peak}");
        assert!(sol.u.values.iter().all(|v| *v > 0.0));
    }
}
