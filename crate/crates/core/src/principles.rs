//! Numerical checks of the simple and anti-symmetric maximum principles and
//! of the boundary estimate, on single inputs and as seeded randomized
//! suites.
//!
//! Every trial is a pure function of its seed, and suites collect trials in
//! index order, so reports do not depend on the thread count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Cell, Csv};
use crate::kernel::{g_apply, regime_bound, KernelParams};
use crate::lattice::{min_on_region, Axis, Grid, GridFunction, Idx, Point, ReflectionFrame, Region, MAX_DIM};
use crate::operator::{Operator, QuadratureConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Violation,
    Vacuous,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Violation => "violation",
            Outcome::Vacuous => "vacuous",
        }
    }
}

/// One trial: the input seed, the minimizing node and the signed margin
/// (negative is the expected sign).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: usize,
    pub seed: u64,
    pub node: Vec<i64>,
    pub x: Vec<f64>,
    pub margin: Option<f64>,
    #[serde(rename = "I1", skip_serializing_if = "Option::is_none", default)]
    pub i1: Option<f64>,
    #[serde(rename = "I2", skip_serializing_if = "Option::is_none", default)]
    pub i2: Option<f64>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    pub vacuous: usize,
    /// Least negative margin over the non-vacuous trials.
    pub margin_floor: Option<f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub witnesses: Vec<Witness>,
}

impl ExperimentReport {
    pub fn from_witnesses(name: &str, tolerances: BTreeMap<String, f64>, witnesses: Vec<Witness>) -> Self {
        let count = |o: Outcome| witnesses.iter().filter(|w| w.outcome == o).count();
        let margin_floor = witnesses
            .iter()
            .filter(|w| w.outcome != Outcome::Vacuous)
            .filter_map(|w| w.margin)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        ExperimentReport {
            name: name.to_string(),
            trials: witnesses.len(),
            violations: count(Outcome::Violation),
            vacuous: count(Outcome::Vacuous),
            margin_floor,
            tolerances,
            witnesses,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// `trial,seed,margin,result`
    pub fn summary_csv(&self) -> String {
        let mut csv = Csv::new(&["trial", "seed", "margin", "result"]);
        for w in &self.witnesses {
            csv.row(&[
                Cell::U(w.trial as u64),
                Cell::U(w.seed),
                w.margin.map_or(Cell::S(String::new()), Cell::F),
                Cell::S(w.outcome.as_str().into()),
            ]);
        }
        csv.finish()
    }
}

/// Relative tolerance applied to operator values.
pub const SIGN_TOL: f64 = 1e-12;

/// Scale of operator values for `u`: `C (Σ w + tail) G(max |u|)`.
fn value_scale(op: &Operator, u: &GridFunction) -> f64 {
    op.params.c * (op.lattice_total() + op.ball_tail()) * g_apply(u.max_abs(), op.params.p).abs()
}

fn tolerances(entries: &[(&str, f64)]) -> BTreeMap<String, f64> {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn node_vec(grid: &Grid, idx: &Idx) -> Vec<i64> {
    idx[..grid.n].to_vec()
}

fn simple_mp_witness(op: &Operator, u: &GridFunction, omega: &Region) -> Result<Witness> {
    let grid = &u.grid;
    if let Some(e) = u.exterior.constant_value().filter(|e| *e < 0.0) {
        return Err(Error::HypothesisViolated(format!("exterior value {e} < 0")));
    }
    for (k, v) in u.values.iter().enumerate() {
        let idx = grid.unflat(k);
        if *v < 0.0 && !omega.contains(&grid.coord(&idx)) {
            return Err(Error::HypothesisViolated(format!(
                "u = {v} < 0 at node {:?} outside omega",
                node_vec(grid, &idx)
            )));
        }
    }
    let found = min_on_region(grid, &u.values, |i| omega.contains(&grid.coord(i)) && op.evaluable(u, i));
    let (m, x) = match found {
        Ok(f) => f,
        Err(Error::EmptyRegion) => return Ok(vacuous(grid, &[0; MAX_DIM])),
        Err(e) => return Err(e),
    };
    if m >= 0.0 {
        return Ok(vacuous(grid, &x));
    }
    let value = op.value(u, &x)?;
    let tol = SIGN_TOL * value_scale(op, u);
    Ok(Witness {
        trial: 0,
        seed: 0,
        node: node_vec(grid, &x),
        x: grid.coord(&x)[..grid.n].to_vec(),
        margin: Some(value),
        i1: None,
        i2: None,
        outcome: if value < -tol { Outcome::Pass } else { Outcome::Violation },
    })
}

fn vacuous(grid: &Grid, x: &Idx) -> Witness {
    Witness {
        trial: 0,
        seed: 0,
        node: node_vec(grid, x),
        x: grid.coord(x)[..grid.n].to_vec(),
        margin: None,
        i1: None,
        i2: None,
        outcome: Outcome::Vacuous,
    }
}

/// At the negative minimum of `u` over the evaluable nodes of `omega`, the
/// operator must be negative. Requires `u >= 0` outside `omega`.
pub fn check_simple_mp(u: &GridFunction, omega: &Region, params: &KernelParams, q: &QuadratureConfig) -> Result<ExperimentReport> {
    let op = Operator::new(*params, q.clone(), &u.grid)?;
    let w = simple_mp_witness(&op, u, omega)?;
    Ok(ExperimentReport::from_witnesses(
        "simple-mp",
        tolerances(&[("sign_rel", SIGN_TOL)]),
        vec![w],
    ))
}

fn antisymmetric_witness(op: &Operator, u: &GridFunction, frame: &ReflectionFrame, omega: &Region) -> Result<Witness> {
    let grid = &u.grid;
    let mut w = Vec::with_capacity(u.values.len());
    for (k, v) in u.values.iter().enumerate() {
        let idx = grid.unflat(k);
        let wl = u.value(&frame.reflect_idx(&idx)) - v;
        if frame.in_sigma(&idx) && wl < 0.0 && !omega.contains(&grid.coord(&idx)) {
            return Err(Error::HypothesisViolated(format!(
                "w_lambda = {wl} < 0 at node {:?} outside omega",
                node_vec(grid, &idx)
            )));
        }
        w.push(wl);
    }
    let found = min_on_region(grid, &w, |i| {
        frame.in_sigma(i) && omega.contains(&grid.coord(i)) && op.evaluable(u, i)
    });
    let (m, x) = match found {
        Ok(f) => f,
        Err(Error::EmptyRegion) => return Ok(vacuous(grid, &[0; MAX_DIM])),
        Err(e) => return Err(e),
    };
    if m >= 0.0 {
        return Ok(vacuous(grid, &x));
    }
    let d = op.difference_decomposed(u, frame, &x)?;
    let tol = SIGN_TOL * value_scale(op, u);
    let ok = d.direct < -tol && d.i1 < -tol / op.params.c && d.i2 <= SIGN_TOL * d.i1.abs();
    Ok(Witness {
        trial: 0,
        seed: 0,
        node: node_vec(grid, &x),
        x: grid.coord(&x)[..grid.n].to_vec(),
        margin: Some(d.direct),
        i1: Some(d.i1),
        i2: Some(d.i2),
        outcome: if ok { Outcome::Pass } else { Outcome::Violation },
    })
}

/// At the negative minimum of `w_λ` over the evaluable nodes of
/// `omega ∩ Σ_λ`, the operator difference must be negative, with `I1 < 0`
/// and `I2 <= 0` (up to `1e-12 |I1|`). Requires `w_λ >= 0` on `Σ_λ` outside
/// `omega`.
pub fn check_antisymmetric_mp(
    u: &GridFunction,
    frame: &ReflectionFrame,
    omega: &Region,
    params: &KernelParams,
    q: &QuadratureConfig,
) -> Result<ExperimentReport> {
    let op = Operator::new(*params, q.clone(), &u.grid)?;
    let w = antisymmetric_witness(&op, u, frame, omega)?;
    Ok(ExperimentReport::from_witnesses(
        "antisym-mp",
        tolerances(&[("sign_rel", SIGN_TOL), ("i2_over_i1", SIGN_TOL)]),
        vec![w],
    ))
}

/// Default `Δ` of the schedule `λ_k = λ_o + 2^{-k} Δ`.
pub const DEFAULT_SPAN: f64 = 0.125;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySequence {
    pub axis: Axis,
    pub lambda_o: f64,
    pub lambdas: Vec<f64>,
    pub nodes: Vec<Vec<i64>>,
    pub points: Vec<Vec<f64>>,
    pub deltas: Vec<f64>,
    pub w_min: Vec<f64>,
    pub differences: Vec<f64>,
    pub quotients: Vec<f64>,
    /// `w_{λ_k}(x^k) <= 0`, i.e. the minimum is not positive.
    pub hypothesis_met: Vec<bool>,
}

impl BoundarySequence {
    /// Entries with `hypothesis_met` and `δ_k <= threshold`.
    pub fn resolved(&self, threshold: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.lambdas.len())
            .filter(move |&k| self.hypothesis_met[k] && self.deltas[k] <= threshold)
            .map(|k| (self.deltas[k], self.quotients[k]))
    }
}

/// [`boundary_estimate_sequence_span`] with `Δ =` [`DEFAULT_SPAN`] along `e1`.
pub fn boundary_estimate_sequence(
    u: &GridFunction,
    lambda_o: f64,
    k_max: usize,
    params: &KernelParams,
    q: &QuadratureConfig,
) -> Result<BoundarySequence> {
    boundary_estimate_sequence_span(u, Axis::E1, lambda_o, DEFAULT_SPAN, k_max, params, q)
}

/// Planes `λ_k = λ_o + 2^{-k} Δ` (snapped up to the `h/2` lattice) for
/// `k = 0..=k_max`. For each, `x^k` minimizes `w_{λ_k}` over the evaluable
/// nodes of `Σ_{λ_k}`, ties going to the smallest `δ` and then to the
/// lexicographically smallest node. The sequence stops at a repeated plane or
/// once `δ_k < h`.
pub fn boundary_estimate_sequence_span(
    u: &GridFunction,
    axis: Axis,
    lambda_o: f64,
    span: f64,
    k_max: usize,
    params: &KernelParams,
    q: &QuadratureConfig,
) -> Result<BoundarySequence> {
    let grid = &u.grid;
    let h = grid.h;
    if !(span > 0.0 && span.is_finite()) {
        return Err(Error::InvalidParams(format!("span must be positive, got {span}")));
    }
    if axis.dim >= grid.n {
        return Err(Error::InvalidParams(format!("axis e_{} needs n > {}", axis.dim + 1, axis.dim)));
    }
    let base = ReflectionFrame::new(axis, lambda_o, h)?;
    for (k, v) in u.values.iter().enumerate() {
        let idx = grid.unflat(k);
        if !base.in_sigma(&idx) {
            continue;
        }
        let w = u.value(&base.reflect_idx(&idx)) - v;
        if w < 0.0 || (w <= 0.0 && *v > 0.0) {
            return Err(Error::HypothesisViolated(format!(
                "w_lambda_o = {w} at node {:?} (u = {v})",
                node_vec(grid, &idx)
            )));
        }
    }
    let op = Operator::new(*params, q.clone(), grid)?;
    let mut seq = BoundarySequence {
        axis,
        lambda_o: base.lambda,
        lambdas: Vec::new(),
        nodes: Vec::new(),
        points: Vec::new(),
        deltas: Vec::new(),
        w_min: Vec::new(),
        differences: Vec::new(),
        quotients: Vec::new(),
        hypothesis_met: Vec::new(),
    };
    let mut last = base.half_steps();
    for k in 0..=k_max {
        let target = lambda_o + span * 0.5f64.powi(k as i32);
        let twice = (2.0 * target / h - 1e-9).ceil() as i64;
        if twice <= base.half_steps() || twice == last {
            break;
        }
        last = twice;
        let frame = ReflectionFrame::from_half_steps(axis, twice, h);
        let mut best: Option<(f64, i64, Idx)> = None;
        for (kk, v) in u.values.iter().enumerate() {
            let idx = grid.unflat(kk);
            if !frame.in_sigma(&idx) || !op.evaluable(u, &idx) {
                continue;
            }
            let w = u.value(&frame.reflect_idx(&idx)) - v;
            let dist = twice - 2 * axis.project_idx(&idx);
            let better = match &best {
                None => true,
                Some((bw, bd, _)) => w < *bw || (w == *bw && dist < *bd),
            };
            if better {
                best = Some((w, dist, idx));
            }
        }
        let Some((w, _, x)) = best else { break };
        let xp = grid.coord(&x);
        let delta = (frame.lambda - axis.project(&xp)).abs();
        if delta < h * (1.0 - 1e-12) {
            break;
        }
        let diff = op.difference_direct(u, &frame, &x)?;
        seq.lambdas.push(frame.lambda);
        seq.nodes.push(node_vec(grid, &x));
        seq.points.push(xp[..grid.n].to_vec());
        seq.deltas.push(delta);
        seq.w_min.push(w);
        seq.differences.push(diff);
        seq.quotients.push(diff / delta);
        seq.hypothesis_met.push(w <= 0.0);
    }
    Ok(seq)
}

/// Trial settings shared by the randomized suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    /// Lattice spacing of the 1D and 2D trials.
    pub h_1d: f64,
    pub h_2d: f64,
    pub quadrature: QuadratureConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            trials: 1000,
            seed: 42,
            h_1d: 1.0 / 64.0,
            h_2d: 1.0 / 16.0,
            quadrature: QuadratureConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        for h in [self.h_1d, self.h_2d] {
            if !(h > 0.0 && h <= 0.25) {
                return Err(Error::InvalidParams(format!("trial spacing must lie in (0, 1/4], got {h}")));
            }
        }
        self.quadrature.validate()
    }

    fn trial_seed(&self, t: usize) -> u64 {
        self.seed.wrapping_add(t as u64)
    }
}

/// `p` uniform in `[1.5, 4]`, `s` uniform in `[0.2, 0.8]` below the regime
/// bound, `C = 1`.
fn random_params(rng: &mut ChaCha8Rng, n: usize) -> KernelParams {
    let p = rng.gen_range(1.5..=4.0);
    let top = 0.8f64.min(regime_bound(p) - 1e-3);
    let s = rng.gen_range(0.2..top);
    KernelParams { n, s, p, c: 1.0 }
}

fn trial_grid(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<Grid> {
    let n = if rng.gen_bool(0.5) { 1 } else { 2 };
    let h = if n == 1 { cfg.h_1d } else { cfg.h_2d };
    let margin = cfg.quadrature.near_radius.ceil() as i64 + 2;
    Grid::around_unit_ball(n, h, margin)
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Point {
    let mut d = [0.0; MAX_DIM];
    if n == 1 {
        d[0] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    } else {
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        d[0] = t.cos();
        d[1] = t.sin();
    }
    d
}

/// `(1 - |x - c|^2 / r^2)_+^m`.
#[derive(Clone, Copy, Debug)]
struct Bump {
    center: Point,
    radius: f64,
    power: i32,
}

impl Bump {
    fn at(&self, x: &Point) -> f64 {
        let d2: f64 = (0..MAX_DIM).map(|k| (x[k] - self.center[k]).powi(2)).sum();
        (1.0 - d2 / (self.radius * self.radius)).max(0.0).powi(self.power)
    }
}

fn shift(c: &Point, dir: &Point, t: f64) -> Point {
    [c[0] + t * dir[0], c[1] + t * dir[1], c[2] + t * dir[2]]
}

fn simple_mp_trial(cfg: &SuiteConfig, seed: u64) -> Result<(Witness, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = trial_grid(&mut rng, cfg)?;
    let n = grid.n;
    let params = random_params(&mut rng, n);

    let mut center = [0.0; MAX_DIM];
    let r_c = rng.gen_range(0.0..0.4);
    let dir = random_direction(&mut rng, n);
    center = shift(&center, &dir, r_c);
    let radius = rng.gen_range(0.2..0.5);
    let main = Bump {
        center,
        radius,
        power: rng.gen_range(1..=2),
    };
    let a = rng.gen_range(0.1..10.0);
    let inner_off = rng.gen_range(0.0..0.5) * radius;
    let inner = Bump {
        center: shift(&center, &random_direction(&mut rng, n), inner_off),
        radius: rng.gen_range(0.3..1.0) * (radius - inner_off),
        power: 2,
    };
    let a_inner = rng.gen_range(0.0..1.0) * a;
    let r2 = rng.gen_range(0.1..0.3);
    let outer = Bump {
        center: shift(&center, &random_direction(&mut rng, n), radius + r2 + 0.05),
        radius: r2,
        power: 2,
    };
    let b = rng.gen_range(0.0..5.0);
    let omega = Region::ball(&center[..n], radius);
    let u = GridFunction::from_fn(grid, crate::lattice::ExteriorRule::Zero, |x| {
        -a * main.at(x) - a_inner * inner.at(x) + b * outer.at(x)
    })?;
    let op = Operator::new(params, cfg.quadrature.clone(), &u.grid)?;
    let w = simple_mp_witness(&op, &u, &omega)?;
    Ok((w, format!("n={n} p={:.4} s={:.4}", params.p, params.s)))
}

fn antisym_trial(cfg: &SuiteConfig, seed: u64) -> Result<(Witness, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = trial_grid(&mut rng, cfg)?;
    let n = grid.n;
    let h = grid.h;
    let params = random_params(&mut rng, n);
    let axes = Axis::all(n);
    let axis = axes[rng.gen_range(0..axes.len())];
    let reach = (0.25 * 2.0 / h).floor() as i64;
    let twice = rng.gen_range(-reach..=reach);
    let frame = ReflectionFrame::from_half_steps(axis, twice, h);
    let lambda = frame.lambda;

    // a point at signed depth t inside Σ_λ, with transverse offset
    let place = |t: f64, across: f64| {
        let mut c = [0.0; MAX_DIM];
        c[axis.dim] = axis.sign as f64 * (lambda - t);
        if n > 1 {
            c[1 - axis.dim] = across;
        }
        c
    };
    let t_omega: f64 = rng.gen_range(0.15..0.4);
    let radius = rng.gen_range(0.1..(t_omega - 0.02).min(0.3));
    let omega_bump = Bump {
        center: place(t_omega, rng.gen_range(-0.3..0.3)),
        radius,
        power: rng.gen_range(1..=2),
    };
    let a = rng.gen_range(0.1..5.0);
    let r2 = rng.gen_range(0.05..0.2);
    let t2 = rng.gen_range(r2 + 0.01..0.7 - r2);
    let pos_bump = Bump {
        center: place(t2, rng.gen_range(-0.4..0.4)),
        radius: r2,
        power: 2,
    };
    let gap: f64 = (0..MAX_DIM)
        .map(|k| (pos_bump.center[k] - omega_bump.center[k]).powi(2))
        .sum::<f64>()
        .sqrt();
    let b = if gap > radius + r2 { rng.gen_range(0.0..3.0) } else { 0.0 };
    let sym_radius = rng.gen_range(0.3..0.8);
    let sym_amp = rng.gen_range(0.0..3.0);
    let sym_across = if n > 1 { rng.gen_range(-0.2..0.2) } else { 0.0 };

    // the symmetric part depends on the plane distance through the integer
    // half-step offset so that it is exactly even under reflection
    let values: Vec<f64> = grid
        .nodes()
        .map(|idx| {
            let x = grid.coord(&idx);
            let off = (frame.half_steps() - 2 * axis.project_idx(&idx)) as f64 * h / 2.0;
            let mut d2 = off * off;
            if n > 1 {
                d2 += (x[1 - axis.dim] - sym_across).powi(2);
            }
            let sym = sym_amp * (1.0 - d2 / (sym_radius * sym_radius)).max(0.0);
            let mirrored = grid.coord(&frame.reflect_idx(&idx));
            sym + a * omega_bump.at(&x) + b * pos_bump.at(&mirrored)
        })
        .collect();
    let u = GridFunction::new(grid, values, crate::lattice::ExteriorRule::Zero)?;
    let omega = Region::ball(&omega_bump.center[..n], radius);
    let op = Operator::new(params, cfg.quadrature.clone(), &u.grid)?;
    let w = antisymmetric_witness(&op, &u, &frame, &omega)?;
    Ok((
        w,
        format!("n={n} p={:.4} s={:.4} axis={:?} lambda={lambda}", params.p, params.s, axis),
    ))
}

fn run_suite(
    name: &str,
    cfg: &SuiteConfig,
    tol: BTreeMap<String, f64>,
    trial: impl Fn(&SuiteConfig, u64) -> Result<(Witness, String)> + Sync,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let witnesses: Vec<Witness> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.trial_seed(t);
            let (mut w, _) = trial(cfg, seed)?;
            w.trial = t;
            w.seed = seed;
            Ok(w)
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentReport::from_witnesses(name, tol, witnesses))
}

/// Randomized negative-bump profiles in the unit ball (1D and 2D mixed).
pub fn simple_mp_suite(cfg: &SuiteConfig) -> Result<ExperimentReport> {
    run_suite("simple-mp", cfg, tolerances(&[("sign_rel", SIGN_TOL)]), simple_mp_trial)
}

/// Randomized `u = S + a B_ω + b B_2 ∘ reflect` with `S` even about the
/// plane, so that `w_λ = -a B_ω + b B_2` on `Σ_λ`.
pub fn antisymmetric_mp_suite(cfg: &SuiteConfig) -> Result<ExperimentReport> {
    run_suite(
        "antisym-mp",
        cfg,
        tolerances(&[("sign_rel", SIGN_TOL), ("i2_over_i1", SIGN_TOL)]),
        antisym_trial,
    )
}

/// The parameter line of a suite trial, for diagnostics.
pub fn describe_trial(suite: &str, cfg: &SuiteConfig, trial: usize) -> Result<String> {
    let seed = cfg.trial_seed(trial);
    let out = match suite {
        "simple-mp" => simple_mp_trial(cfg, seed)?,
        "antisym-mp" => antisym_trial(cfg, seed)?,
        other => return Err(Error::InvalidParams(format!("unknown suite {other}"))),
    };
    Ok(out.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{norm, ExteriorRule};

    fn params(n: usize, s: f64, p: f64) -> KernelParams {
        KernelParams::new(n, s, p, 1.0).unwrap()
    }

    #[test]
    fn zero_is_vacuous() {
        let g = Grid::around_unit_ball(1, 1.0 / 32.0, 6).unwrap();
        let r = check_simple_mp(&GridFunction::zeros(g), &Region::ball(&[0.0], 1.0), &params(1, 0.5, 2.0), &QuadratureConfig::default()).unwrap();
        assert_eq!((r.trials, r.vacuous, r.violations), (1, 1, 0));
        assert!(r.margin_floor.is_none());
    }

    #[test]
    fn negative_bump_is_negative_at_minimum() {
        for n in [1, 2] {
            let h = if n == 1 { 1.0 / 64.0 } else { 1.0 / 16.0 };
            let g = Grid::around_unit_ball(n, h, 6).unwrap();
            let u = GridFunction::from_fn(g, ExteriorRule::Zero, |x| -(1.0 - norm(x).powi(2)).max(0.0)).unwrap();
            let r = check_simple_mp(&u, &Region::ball(&vec![0.0; n], 1.0), &params(n, 0.5, 3.0), &QuadratureConfig::default()).unwrap();
            assert_eq!(r.violations, 0);
            assert!(r.margin_floor.unwrap() < 0.0);
            assert!(r.witnesses[0].x.iter().all(|c| *c == 0.0));
        }
    }

    #[test]
    fn simple_mp_hypothesis() {
        let g = Grid::around_unit_ball(1, 1.0 / 32.0, 6).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::Zero, |x| -(1.0 - x[0] * x[0]).max(0.0)).unwrap();
        let e = check_simple_mp(&u, &Region::ball(&[0.0], 0.5), &params(1, 0.5, 2.0), &QuadratureConfig::default());
        assert!(matches!(e, Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn symmetric_u_is_vacuous_for_antisym() {
        let g = Grid::around_unit_ball(1, 1.0 / 32.0, 6).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::Zero, |x| (1.0 - x[0] * x[0]).max(0.0)).unwrap();
        let frame = ReflectionFrame::new(Axis::E1, 0.0, 1.0 / 32.0).unwrap();
        let r = check_antisymmetric_mp(&u, &frame, &Region::All, &params(1, 0.5, 2.0), &QuadratureConfig::default()).unwrap();
        assert_eq!(r.vacuous, 1);
    }

    #[test]
    fn small_suites_pass_and_repeat() {
        let cfg = SuiteConfig {
            trials: 24,
            ..Default::default()
        };
        let a = simple_mp_suite(&cfg).unwrap();
        assert_eq!(a.violations, 0, "{:?}", a.witnesses);
        assert!(a.vacuous < a.trials);
        let b = antisymmetric_mp_suite(&cfg).unwrap();
        assert_eq!(b.violations, 0, "{:?}", b.witnesses);
        assert!(b.vacuous < b.trials);
        assert_eq!(b, antisymmetric_mp_suite(&cfg).unwrap());
        assert_eq!(a.summary_csv().lines().count(), 25);
    }

    #[test]
    fn boundary_sequence_on_power_profile() {
        let h = 1.0 / 64.0;
        let g = Grid::around_unit_ball(1, h, 8).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::Zero, |x| (1.0 - x[0] * x[0]).max(0.0).sqrt()).unwrap();
        let seq = boundary_estimate_sequence(&u, -0.25, 8, &params(1, 0.5, 2.0), &QuadratureConfig::default()).unwrap();
        assert!(!seq.lambdas.is_empty());
        for k in 0..seq.lambdas.len() {
            assert!(seq.lambdas[k] > -0.25);
            assert_eq!(seq.deltas[k], (seq.lambdas[k] - seq.points[k][0]).abs());
            if seq.hypothesis_met[k] {
                assert!(seq.quotients[k] < 0.0);
            }
        }
        assert!(seq.lambdas.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn boundary_sequence_rejects_symmetric_plane() {
        let g = Grid::around_unit_ball(1, 1.0 / 32.0, 6).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::Zero, |x| (1.0 - x[0] * x[0]).max(0.0)).unwrap();
        let e = boundary_estimate_sequence(&u, 0.0, 4, &params(1, 0.5, 2.0), &QuadratureConfig::default());
        assert!(matches!(e, Err(Error::HypothesisViolated(_))));
    }
}
