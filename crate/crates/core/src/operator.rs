//! Principal-value quadrature of the fractional p-Laplacian on a lattice,
//! and the operator difference `(-Δ)_p^s u_λ - (-Δ)_p^s u` computed either
//! directly or through the split into `I1 + I2`.
//!
//! Each offset `z` (in lattice units) carries the weight
//! `h^{-sp} |z|^{-(n+sp)}`. Offsets within `near_radius` are summed in
//! antipodal pairs, the offset `z = 0` is skipped, and the nearest axis
//! neighbours get an extra `κ/2 · h^{-sp}` where `κ` is the gap between the
//! continuum and lattice second moments of the kernel. With that correction
//! the paired sum is second-order consistent for smooth data instead of
//! losing `O(h^{2-sp})`.
//!
//! Beyond the box, values come from the exterior rule: lattice nodes inside
//! the ball of radius `R` around `x` are summed explicitly (in closed form for
//! constant exteriors), and the continuum beyond `R` is integrated
//! analytically (constant) or by radial quadrature (power decay).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{g_apply, KernelParams};
use crate::lattice::{dist2, ExteriorRule, Grid, GridFunction, Idx, Point, ReflectionFrame, MAX_DIM};
use crate::quad::{adaptive_simpson, gauss_legendre};

/// Node ordering used inside a single evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Summation {
    /// Near pairs by increasing offset, then box nodes in row-major order.
    #[default]
    RowMajor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Radius of the paired zone, in units of `h`.
    pub near_radius: f64,
    /// Radius beyond which the exterior tail is integrated; `None` picks a
    /// radius that covers the box and every reflection of it across a plane
    /// through the box.
    pub tail_radius: Option<f64>,
    pub summation: Summation,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            near_radius: 4.0,
            tail_radius: None,
            summation: Summation::RowMajor,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.near_radius >= 1.0 && self.near_radius.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "near_radius must be >= 1 (in units of h), got {}",
                self.near_radius
            )));
        }
        if let Some(r) = self.tail_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParams(format!("tail_radius must be positive, got {r}")));
            }
        }
        Ok(())
    }
}

/// Components of one evaluation, each already multiplied by `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: Vec<f64>,
    pub value: f64,
    pub near: f64,
    pub mid: f64,
    pub tail: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    pub direct: f64,
    #[serde(rename = "C_times_sum")]
    pub c_times_sum: f64,
}

impl DecompositionResult {
    pub fn relative_gap(&self) -> f64 {
        (self.c_times_sum - self.direct).abs() / (self.direct.abs() + 1e-14)
    }
}

/// Surface measure of the unit sphere in `R^n`.
pub fn sphere_measure(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// Radius that keeps the box, and its mirror image across any plane that
/// meets the box, inside the tail ball of every box node.
pub fn auto_tail_radius(grid: &Grid) -> f64 {
    let spans: Vec<f64> = grid
        .extent
        .iter()
        .map(|&(lo, hi)| (hi - lo) as f64 * grid.h)
        .collect();
    let sum2: f64 = spans.iter().map(|s| s * s).sum();
    let worst = spans
        .iter()
        .map(|s| (sum2 + 3.0 * s * s).sqrt())
        .fold(0.0, f64::max);
    worst + grid.h
}

/// Lattice quadrature for one `(params, h, R)` combination.
#[derive(Clone, Debug)]
pub struct Operator {
    pub params: KernelParams,
    pub config: QuadratureConfig,
    h: f64,
    tail_radius: f64,
    /// Largest squared offset inside the tail ball.
    k_max: i64,
    near_r2: i64,
    weights: Vec<f64>,
    /// Half of the near offsets (first nonzero component positive).
    near: Vec<(Idx, f64)>,
    near_total: f64,
    lattice_total: f64,
    ball_tail: f64,
    kappa: f64,
    directions: Vec<(Point, f64)>,
}

impl Operator {
    /// Operator for functions living on `grid` (or its reflections).
    pub fn new(params: KernelParams, config: QuadratureConfig, grid: &Grid) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        if grid.n != params.n {
            return Err(Error::InvalidParams(format!(
                "grid dimension {} does not match n = {}",
                grid.n, params.n
            )));
        }
        let tail_radius = config.tail_radius.unwrap_or_else(|| auto_tail_radius(grid));
        Self::with_radius(params, config, grid.h, tail_radius)
    }

    pub fn with_radius(params: KernelParams, config: QuadratureConfig, h: f64, tail_radius: f64) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let n = params.n;
        let sp = params.sp();
        let rh = tail_radius / h;
        if rh < config.near_radius {
            return Err(Error::TailRadiusTooSmall {
                tail_radius,
                required: config.near_radius * h,
            });
        }
        if rh.powi(n as i32) > 4e8 {
            return Err(Error::InvalidParams(format!(
                "tail ball of {rh:.0} nodes per axis is too large"
            )));
        }
        let k_max = (rh * rh + 1e-9).floor() as i64;
        let near_r2 = (config.near_radius * config.near_radius + 1e-9).floor() as i64;
        let kappa = lattice_kappa(n, sp, params.p);
        let weights: Vec<f64> = (0..=k_max).map(|d2| offset_weight(&params, kappa, h, d2)).collect();

        let mut near = Vec::new();
        let mut near_total = 0.0;
        let mut lattice_total = 0.0;
        let r = (k_max as f64).sqrt().floor() as i64;
        for_each_offset(n, r, |z| {
            let d2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
            if d2 == 0 || d2 > k_max {
                return;
            }
            let w = weights[d2 as usize];
            lattice_total += w;
            if d2 <= near_r2 {
                near_total += w;
                let first = z.iter().copied().find(|c| *c != 0).unwrap_or(0);
                if first > 0 {
                    near.push((z, w));
                }
            }
        });
        near.sort_by_key(|(z, _)| (z[0] * z[0] + z[1] * z[1] + z[2] * z[2], *z));

        let ball_tail = sphere_measure(n) * tail_radius.powf(-sp) / sp;
        Ok(Operator {
            params,
            config,
            h,
            tail_radius,
            k_max,
            near_r2,
            weights,
            near,
            near_total,
            lattice_total,
            ball_tail,
            kappa,
            directions: directions(n),
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn tail_radius(&self) -> f64 {
        self.tail_radius
    }

    /// Largest squared lattice offset inside the tail ball.
    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Weight of a node at squared lattice distance `d2` (zero beyond `R`).
    #[inline]
    pub fn weight(&self, d2: i64) -> f64 {
        if d2 > self.k_max {
            0.0
        } else {
            self.weights[d2 as usize]
        }
    }

    /// Sum of all weights in the tail ball.
    pub fn lattice_total(&self) -> f64 {
        self.lattice_total
    }

    /// `σ R^{-sp} / (sp)`: the continuum weight beyond `R`.
    pub fn ball_tail(&self) -> f64 {
        self.ball_tail
    }

    pub fn near_r2(&self) -> i64 {
        self.near_r2
    }

    /// Whether `x` is at least `near_radius` inside the box of `u`.
    pub fn evaluable(&self, u: &GridFunction, x: &Idx) -> bool {
        self.check_node(u, x).is_ok()
    }

    fn check_node(&self, u: &GridFunction, x: &Idx) -> Result<()> {
        if !u.grid.contains(x) || u.grid.distance_to_edge(x) < self.config.near_radius * self.h * (1.0 - 1e-12) {
            return Err(Error::NearBoundary {
                node: x[..u.grid.n].to_vec(),
                near_radius: self.config.near_radius * self.h,
            });
        }
        Ok(())
    }

    fn check_support(&self, u: &GridFunction, x: &Idx) -> Result<()> {
        if (u.grid.h - self.h).abs() > 1e-12 * self.h || u.grid.n != self.params.n {
            return Err(Error::InvalidParams("grid does not match the operator".into()));
        }
        let required = u.grid.circumradius_from(&u.grid.coord(x));
        if required > self.tail_radius * (1.0 + 1e-12) {
            return Err(Error::TailRadiusTooSmall {
                tail_radius: self.tail_radius,
                required,
            });
        }
        Ok(())
    }

    /// `(-Δ)_p^s u(x)` with its near/mid/tail split.
    pub fn eval(&self, u: &GridFunction, x: &Idx) -> Result<PointRecord> {
        self.check_node(u, x)?;
        self.check_support(u, x)?;
        Ok(self.eval_unchecked(u, x))
    }

    pub fn value(&self, u: &GridFunction, x: &Idx) -> Result<f64> {
        self.eval(u, x).map(|r| r.value)
    }

    /// Evaluation at every node at least `near_radius` inside the box, in
    /// row-major order.
    pub fn eval_interior(&self, u: &GridFunction) -> Result<Vec<PointRecord>> {
        use rayon::prelude::*;
        let nodes: Vec<Idx> = u
            .grid
            .nodes()
            .filter(|i| self.check_node(u, i).is_ok())
            .collect();
        nodes.par_iter().map(|x| self.eval(u, x)).collect()
    }

    pub(crate) fn eval_unchecked(&self, u: &GridFunction, x: &Idx) -> PointRecord {
        let p = self.params.p;
        let c = self.params.c;
        let ux = u.value(x);

        let mut near = 0.0;
        for (z, w) in &self.near {
            let a = [x[0] + z[0], x[1] + z[1], x[2] + z[2]];
            let b = [x[0] - z[0], x[1] - z[1], x[2] - z[2]];
            near += w * (g_apply(ux - u.value(&a), p) + g_apply(ux - u.value(&b), p));
        }

        let mut mid = 0.0;
        let mut w_support = 0.0;
        for_each_node(&u.grid, |k, y| {
            let d2 = dist2(x, &y);
            if d2 <= self.near_r2 {
                return;
            }
            let w = self.weights[d2 as usize];
            mid += w * g_apply(ux - u.values[k], p);
            w_support += w;
        });

        let tail;
        match u.exterior.constant_value() {
            Some(e) => {
                let rest = self.lattice_total - self.near_total - w_support;
                let ge = g_apply(ux - e, p);
                mid += rest * ge;
                tail = self.ball_tail * ge;
            }
            None => {
                let r = (self.k_max as f64).sqrt().floor() as i64;
                let n = self.params.n;
                for_each_offset(n, r, |z| {
                    let d2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
                    if d2 <= self.near_r2 || d2 > self.k_max {
                        return;
                    }
                    let y = [x[0] + z[0], x[1] + z[1], x[2] + z[2]];
                    if u.grid.contains(&y) {
                        return;
                    }
                    let e = u.exterior.value_at(&u.grid.coord(&y));
                    mid += self.weights[d2 as usize] * g_apply(ux - e, p);
                });
                tail = self.continuum_tail(&u.exterior, &u.grid.coord(x), ux);
            }
        }

        PointRecord {
            x: u.grid.coord(x)[..u.grid.n].to_vec(),
            value: c * (near + mid + tail),
            near: c * near,
            mid: c * mid,
            tail: c * tail,
        }
    }

    /// `∫_{|z|>R} G(ux - e(x+z)) |z|^{-n-sp} dz` (without `C`).
    pub(crate) fn continuum_tail(&self, exterior: &ExteriorRule, x: &Point, ux: f64) -> f64 {
        let p = self.params.p;
        if let Some(e) = exterior.constant_value() {
            return self.ball_tail * g_apply(ux - e, p);
        }
        let sp = self.params.sp();
        let rr = self.tail_radius;
        let dirs = &self.directions;
        let f = |v: f64| {
            let mut acc = 0.0;
            if v <= 0.0 {
                let g0 = g_apply(ux, p);
                for (_, w) in dirs {
                    acc += w * g0;
                }
                return acc;
            }
            let r = rr * v.powf(-1.0 / sp);
            for (d, w) in dirs {
                let y = [x[0] + r * d[0], x[1] + r * d[1], x[2] + r * d[2]];
                acc += w * g_apply(ux - exterior.value_at(&y), p);
            }
            acc
        };
        let scale = g_apply(ux.abs().max(1e-300), p).abs() * sphere_measure(self.params.n);
        adaptive_simpson(&f, 0.0, 1.0, 1e-8, 1e-12 * scale.max(1e-300)) / (sp * rr.powf(sp))
    }

    /// `(-Δ)_p^s u_λ(x) - (-Δ)_p^s u(x)` on shared nodes.
    pub fn difference_direct(&self, u: &GridFunction, frame: &ReflectionFrame, x: &Idx) -> Result<f64> {
        self.check_difference(u, frame, x)?;
        let ul = reflect_function(u, frame);
        self.check_support(&ul, x)?;
        Ok(self.eval_unchecked(&ul, x).value - self.eval_unchecked(u, x).value)
    }

    fn check_difference(&self, u: &GridFunction, frame: &ReflectionFrame, x: &Idx) -> Result<()> {
        self.check_node(u, x)?;
        self.check_support(u, x)?;
        if (frame.h() - self.h).abs() > 1e-12 * self.h {
            return Err(Error::MisalignedPlane {
                lambda: frame.lambda,
                half_h: self.h / 2.0,
            });
        }
        if !frame.in_sigma(x) {
            return Err(Error::InvalidParams(format!(
                "node {:?} is not in Sigma_lambda",
                &x[..u.grid.n]
            )));
        }
        Ok(())
    }

    /// The split of the operator difference into `I1` (kernel difference
    /// times the `G` difference, paired over `Σ_λ`) and `I2` (everything
    /// weighted by `|x - y^λ|^{-n-sp}`, plus nodes whose mirror image falls
    /// outside the tail ball and the tails themselves).
    pub fn difference_decomposed(
        &self,
        u: &GridFunction,
        frame: &ReflectionFrame,
        x: &Idx,
    ) -> Result<DecompositionResult> {
        self.check_difference(u, frame, x)?;
        let ul = reflect_function(u, frame);
        self.check_support(&ul, x)?;
        let p = self.params.p;
        let ux = u.value(x);
        let ulx = ul.value(x);
        let a_of = |y: &Idx| g_apply(ulx - ul.value(y), p) - g_apply(ux - u.value(y), p);

        let mut i1 = 0.0;
        let mut i2 = 0.0;
        let r = (self.k_max as f64).sqrt().floor() as i64;
        for_each_offset(self.params.n, r, |z| {
            let d2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
            if d2 == 0 || d2 > self.k_max {
                return;
            }
            let y = [x[0] + z[0], x[1] + z[1], x[2] + z[2]];
            let k = self.weights[d2 as usize];
            let yl = frame.reflect_idx(&y);
            let dl2 = dist2(x, &yl);
            if frame.in_sigma(&y) {
                if dl2 <= self.k_max {
                    let kl = self.weights[dl2 as usize];
                    let ay = a_of(&y);
                    i1 += (k - kl) * ay;
                    i2 += kl * (ay + a_of(&yl));
                } else {
                    i2 += k * a_of(&y);
                }
            } else if frame.on_plane(&y) {
                i2 += k * a_of(&y);
            } else if yl == *x || dl2 > self.k_max {
                // mirror image is the singular cell or lies beyond R
                i2 += k * a_of(&y);
            }
        });
        let xp = u.grid.coord(x);
        i2 += self.continuum_tail(&ul.exterior, &xp, ulx) - self.continuum_tail(&u.exterior, &xp, ux);

        let c = self.params.c;
        let direct = self.eval_unchecked(&ul, x).value - self.eval_unchecked(u, x).value;
        Ok(DecompositionResult {
            i1,
            i2,
            direct,
            c_times_sum: c * (i1 + i2),
        })
    }
}

/// `u_λ = u ∘ reflect` as a grid function on the mirrored box, with the
/// exterior rule mirrored as well.
pub fn reflect_function(u: &GridFunction, frame: &ReflectionFrame) -> GridFunction {
    let d = frame.axis.dim;
    let mut extent = u.grid.extent.clone();
    let (lo, hi) = extent[d];
    let lo_corner = frame.reflect_idx(&{
        let mut i = [0i64; MAX_DIM];
        i[d] = lo;
        i
    })[d];
    let hi_corner = frame.reflect_idx(&{
        let mut i = [0i64; MAX_DIM];
        i[d] = hi;
        i
    })[d];
    extent[d] = (lo_corner.min(hi_corner), lo_corner.max(hi_corner));
    let grid = Grid {
        n: u.grid.n,
        h: u.grid.h,
        extent,
    };
    let mut values = Vec::with_capacity(u.values.len());
    for_each_node(&grid, |_, y| {
        let k = u.grid.flat(&frame.reflect_idx(&y)).expect("mirror of the mirrored box");
        values.push(u.values[k]);
    });
    let exterior = match &u.exterior {
        ExteriorRule::PowerDecay {
            amplitude,
            alpha,
            center,
        } => {
            let mut c = [0.0; MAX_DIM];
            for (k, v) in center.iter().take(MAX_DIM).enumerate() {
                c[k] = *v;
            }
            ExteriorRule::PowerDecay {
                amplitude: *amplitude,
                alpha: *alpha,
                center: frame.reflect(&c).to_vec(),
            }
        }
        other => other.clone(),
    };
    GridFunction {
        grid,
        values,
        exterior,
    }
}

/// One-shot evaluation; prefer [`Operator`] when evaluating many nodes.
pub fn frac_p_laplacian(u: &GridFunction, x: &Idx, params: &KernelParams, q: &QuadratureConfig) -> Result<f64> {
    Operator::new(*params, q.clone(), &u.grid)?.value(u, x)
}

pub fn operator_difference_direct(
    u: &GridFunction,
    frame: &ReflectionFrame,
    x: &Idx,
    params: &KernelParams,
    q: &QuadratureConfig,
) -> Result<f64> {
    Operator::new(*params, q.clone(), &u.grid)?.difference_direct(u, frame, x)
}

pub fn operator_difference_decomposed(
    u: &GridFunction,
    frame: &ReflectionFrame,
    x: &Idx,
    params: &KernelParams,
    q: &QuadratureConfig,
) -> Result<DecompositionResult> {
    Operator::new(*params, q.clone(), &u.grid)?.difference_decomposed(u, frame, x)
}

/// Visits the nodes of a box in row-major order with their flat offsets.
pub(crate) fn for_each_node(grid: &Grid, mut f: impl FnMut(usize, Idx)) {
    let mut ext = [(0i64, 0i64); MAX_DIM];
    ext[..grid.n].copy_from_slice(&grid.extent);
    let mut k = 0usize;
    for i0 in ext[0].0..=ext[0].1 {
        for i1 in ext[1].0..=ext[1].1 {
            for i2 in ext[2].0..=ext[2].1 {
                f(k, [i0, i1, i2]);
                k += 1;
            }
        }
    }
}

/// Visits every offset in `[-r, r]^n` in row-major order.
pub(crate) fn for_each_offset(n: usize, r: i64, mut f: impl FnMut(Idx)) {
    let r1 = if n >= 2 { r } else { 0 };
    let r2 = if n >= 3 { r } else { 0 };
    for a in -r..=r {
        for b in -r1..=r1 {
            for c in -r2..=r2 {
                f([a, b, c]);
            }
        }
    }
}

fn directions(n: usize) -> Vec<(Point, f64)> {
    match n {
        1 => vec![([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)],
        2 => {
            let m = 64;
            let w = 2.0 * std::f64::consts::PI / m as f64;
            (0..m)
                .map(|k| {
                    let t = (k as f64 + 0.5) * w;
                    ([t.cos(), t.sin(), 0.0], w)
                })
                .collect()
        }
        _ => {
            let m = 24;
            let wp = 2.0 * std::f64::consts::PI / m as f64;
            let mut out = Vec::new();
            for (ct, wt) in gauss_legendre(12) {
                let st = (1.0 - ct * ct).sqrt();
                for k in 0..m {
                    let ph = (k as f64 + 0.5) * wp;
                    out.push(([st * ph.cos(), st * ph.sin(), ct], wt * wp));
                }
            }
            out
        }
    }
}

/// Weight of a lattice offset with squared length `d2`:
/// `h^{-sp} (d2^{-(n+sp)/2} + [d2 = 1] κ/2)`, zero for `d2 = 0`.
pub fn offset_weight(params: &KernelParams, kappa: f64, h: f64, d2: i64) -> f64 {
    if d2 == 0 {
        return 0.0;
    }
    let sp = params.sp();
    let mut w = (d2 as f64).powf(-(params.n as f64 + sp) / 2.0);
    if d2 == 1 {
        w += 0.5 * kappa;
    }
    w * h.powf(-sp)
}

/// `κ(n, sp, p) = ∫ |z_1|^p |z|^{-n-sp} dz - Σ_{z≠0} |z_1|^p |z|^{-n-sp}`,
/// both regularized with a Gaussian cutoff of width `N` and extrapolated in
/// `N`. For `p = 2` this is the second-moment gap; for other `p` it matches
/// the leading term of the paired sum when the gradient is along an axis
/// (in 1D exactly `-2ζ(1 + sp - p)`).
pub fn lattice_kappa(n: usize, sp: f64, p: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, sp.to_bits(), p.to_bits());
    if let Some(k) = cache.lock().expect("kappa cache").get(&key) {
        return *k;
    }
    let (a, b) = match n {
        1 => (20, 40),
        2 => (16, 32),
        _ => (4, 8),
    };
    let ka = kappa_at(n, sp, p, a);
    let kb = kappa_at(n, sp, p, b);
    let k = (4.0 * kb - ka) / 3.0;
    cache.lock().expect("kappa cache").insert(key, k);
    k
}

fn kappa_at(n: usize, sp: f64, p: f64, cutoff: i64) -> f64 {
    let nf = cutoff as f64;
    let r = 7 * cutoff;
    let nn = n as f64;
    // ∫_{S^{n-1}} |θ_1|^p
    let angular = 2.0 * std::f64::consts::PI.powf((nn - 1.0) / 2.0) * gamma((p + 1.0) / 2.0) / gamma((nn + p) / 2.0);
    let continuum = angular * nf.powf(p - sp) * gamma((p - sp) / 2.0) / 2.0;
    let expo = -(nn + sp) / 2.0;
    let mut lattice = 0.0;
    for_each_offset(n, r, |z| {
        let d2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        if d2 == 0 || d2 > r * r || z[0] == 0 {
            return;
        }
        let d2f = d2 as f64;
        lattice += (z[0].abs() as f64).powf(p) * d2f.powf(expo) * (-d2f / (nf * nf)).exp();
    });
    continuum - lattice
}

/// Lanczos approximation, accurate to ~1e-15 for `x > 0`.
fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Axis;

    fn p2(n: usize, s: f64) -> KernelParams {
        KernelParams::new(n, s, 2.0, 1.0).unwrap()
    }

    #[test]
    fn gamma_values() {
        assert!((gamma(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
        assert!((gamma(0.3) - 2.991_568_987_687_590_6).abs() < 1e-12);
    }

    #[test]
    fn kappa_matches_zeta_in_one_dimension() {
        // in 1D the correction is -2 ζ(1 + sp - p)
        assert!((lattice_kappa(1, 1.0, 2.0) - 1.0).abs() < 1e-6);
        assert!((lattice_kappa(1, 1.4, 2.0) - 2.2696).abs() < 1e-3);
        assert!((lattice_kappa(1, 0.6, 2.0) - 0.4943).abs() < 1e-3);
        assert!((lattice_kappa(1, 1.5, 3.0) - 0.415_772_1).abs() < 1e-5);
        assert!(lattice_kappa(1, 1.0, 4.0).abs() < 1e-5);
    }

    #[test]
    fn weights_positive_and_decreasing() {
        for n in [1, 2, 3] {
            for p in [1.5, 2.0, 2.5, 3.0, 4.0] {
                for s in [0.2, 0.5, 0.66, 0.8] {
                    let Ok(params) = KernelParams::new(n, s, p, 1.0) else { continue };
                    let op = Operator::with_radius(params, QuadratureConfig::default(), 0.25, 2.0).unwrap();
                    for d2 in 1..op.k_max() {
                        assert!(op.weight(d2 + 1) < op.weight(d2) && op.weight(d2 + 1) > 0.0, "{n} {p} {s} {d2}");
                    }
                }
            }
        }
    }

    #[test]
    fn kappa_stable_in_cutoff() {
        // the |z_1|^p kink slows the cutoff limit for small p
        for (sp, p) in [(1.0, 2.0), (1.5, 3.0), (2.4, 3.0), (0.5, 1.5), (1.2, 2.5)] {
            let coarse = (4.0 * kappa_at(2, sp, p, 16) - kappa_at(2, sp, p, 8)) / 3.0;
            let fine = (4.0 * kappa_at(2, sp, p, 32) - kappa_at(2, sp, p, 16)) / 3.0;
            assert!((coarse - fine).abs() < 1e-3 * fine.abs().max(1.0), "{sp} {p}: {coarse} {fine}");
        }
    }

    #[test]
    fn tail_example() {
        let params = KernelParams::new(1, 0.5, 2.0, 1.0).unwrap();
        let cfg = QuadratureConfig {
            tail_radius: Some(2.0),
            ..Default::default()
        };
        let op = Operator::with_radius(params, cfg, 1.0 / 16.0, 2.0).unwrap();
        assert!((op.ball_tail() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_and_odd() {
        let g = Grid::cube(1, 1.0 / 32.0, 32).unwrap();
        let params = KernelParams::new(1, 0.4, 3.0, 1.0).unwrap();
        let op = Operator::new(params, QuadratureConfig::default(), &g).unwrap();
        let c = GridFunction::from_fn(g.clone(), ExteriorRule::Constant { value: 2.5 }, |_| 2.5).unwrap();
        assert_eq!(op.value(&c, &[3, 0, 0]).unwrap(), 0.0);
        let odd = GridFunction::from_fn(g.clone(), ExteriorRule::Zero, |x| x[0] * (1.0 - x[0] * x[0])).unwrap();
        assert!(op.value(&odd, &[0, 0, 0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn near_boundary_rejected() {
        let g = Grid::cube(1, 0.125, 8).unwrap();
        let u = GridFunction::zeros(g.clone());
        let r = frac_p_laplacian(&u, &[5, 0, 0], &p2(1, 0.5), &QuadratureConfig::default());
        assert!(matches!(r, Err(Error::NearBoundary { .. })));
        assert!(frac_p_laplacian(&u, &[4, 0, 0], &p2(1, 0.5), &QuadratureConfig::default()).is_ok());
    }

    #[test]
    fn small_tail_radius_rejected() {
        let g = Grid::cube(1, 0.125, 16).unwrap();
        let u = GridFunction::zeros(g);
        let cfg = QuadratureConfig {
            tail_radius: Some(1.0),
            ..Default::default()
        };
        let r = frac_p_laplacian(&u, &[0, 0, 0], &p2(1, 0.5), &cfg);
        assert!(matches!(r, Err(Error::TailRadiusTooSmall { .. })));
    }

    #[test]
    fn records_sum_to_value() {
        let g = Grid::cube(2, 0.125, 10).unwrap();
        let u = GridFunction::from_fn(g.clone(), ExteriorRule::Zero, |x| (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0)).unwrap();
        let op = Operator::new(KernelParams::new(2, 0.5, 3.0, 0.7).unwrap(), QuadratureConfig::default(), &g).unwrap();
        let r = op.eval(&u, &[1, -2, 0]).unwrap();
        assert!((r.near + r.mid + r.tail - r.value).abs() <= 1e-14 * r.value.abs());
        assert_eq!(r.x, vec![0.125, -0.25]);
    }

    #[test]
    fn power_decay_tail_against_constant_limit() {
        // α → 0 makes the exterior constant, so both tails must agree
        let g = Grid::cube(2, 0.25, 8).unwrap();
        let params = KernelParams::new(2, 0.5, 2.0, 1.0).unwrap();
        let op = Operator::new(params, QuadratureConfig::default(), &g).unwrap();
        let pd = ExteriorRule::power_decay(1.0, 1e-12).unwrap();
        let t1 = op.continuum_tail(&pd, &[0.3, 0.1, 0.0], 2.0);
        let t2 = op.continuum_tail(&ExteriorRule::Constant { value: 1.0 }, &[0.3, 0.1, 0.0], 2.0);
        assert!((t1 - t2).abs() < 1e-8 * t2.abs());
    }

    #[test]
    fn symmetric_difference_vanishes() {
        let g = Grid::cube(1, 1.0 / 32.0, 48).unwrap();
        let u = GridFunction::from_fn(g.clone(), ExteriorRule::Zero, |x| (1.0 - x[0] * x[0]).max(0.0).powf(0.5)).unwrap();
        let params = KernelParams::new(1, 0.5, 3.0, 1.0).unwrap();
        let op = Operator::new(params, QuadratureConfig::default(), &g).unwrap();
        let f = ReflectionFrame::new(Axis::E1, 0.0, g.h).unwrap();
        let d = op.difference_decomposed(&u, &f, &[-10, 0, 0]).unwrap();
        assert!(d.direct.abs() < 1e-12 && d.i1.abs() < 1e-12 && d.i2.abs() < 1e-12);
    }

    #[test]
    fn reflected_function_layout() {
        let g = Grid::new(1, 0.5, vec![(-2, 4)]).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::power_decay_about(1.0, 1.0, [2.0, 0.0, 0.0]).unwrap(), |x| x[0]).unwrap();
        let f = ReflectionFrame::new(Axis::E1, 0.25, 0.5).unwrap();
        let ul = reflect_function(&u, &f);
        assert_eq!(ul.grid.extent, vec![(-3, 3)]);
        for i in -10..10 {
            let y = [i, 0, 0];
            assert_eq!(ul.value(&y), u.value(&f.reflect_idx(&y)), "node {i}");
        }
    }
}
