//! The integral that replaces the narrow region principle near `x_1 = -1`:
//!
//! `I = ∫_{Σ_λ} [G'(ξ(y)) + G'(η(y))] / |x° - y^λ|^{n+sp} dy`
//!
//! at the minimum `x°` of `w_λ`, with each `G'(ξ)` taken as the exact
//! difference quotient of `G` over `[t_1, t_2]` (and `[t_3, t_4]`), so the
//! mean-value points are never computed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Cell, Csv};
use crate::kernel::{difference_quotient, KernelParams};
use crate::lattice::{dist2, min_on_region, norm, Axis, ExteriorRule, Grid, GridFunction, ReflectionFrame};
use crate::operator::{auto_tail_radius, for_each_offset, lattice_kappa, offset_weight};

/// Planes must satisfy `-1 < λ <= -1 + MAX_WIDTH`.
pub const MAX_WIDTH: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NarrowRegionProbe {
    pub lambda: f64,
    /// `λ + 1`, the width of `Ω_λ` along `e1`.
    pub delta: f64,
    pub x_min: Vec<i64>,
    pub x: Vec<f64>,
    pub w_min: f64,
    pub u_min: f64,
    #[serde(rename = "I")]
    pub i_value: f64,
    /// `I δ^{sp} / u^{p-2}(x°)`.
    pub c2_ratio: f64,
    /// `c2 u^{p-2}(x°) / δ^{sp}` with `c2` the smallest ratio of the family
    /// (the probe's own ratio when standalone).
    pub lower_bound: f64,
    /// `q u^{q-1}(x°)`.
    pub rhs_coefficient: f64,
    /// `C I > q u^{q-1}(x°)`.
    pub contradiction_holds: bool,
}

/// Evaluates `I` at the minimum of `w_λ` over `Ω_λ = Σ_λ ∩ B_1` (plane
/// normal `e1`). The lattice sum runs over the nodes of `Σ_λ` whose mirror
/// lies within the tail radius of `x°`; the rest of `Σ_λ` only adds to `I`.
pub fn narrow_region_probe(u: &GridFunction, lambda: f64, params: &KernelParams, q: f64) -> Result<NarrowRegionProbe> {
    params.validate()?;
    if params.p < 2.0 {
        return Err(Error::UnsupportedExponent(params.p));
    }
    if !(lambda > -1.0 && lambda <= -1.0 + MAX_WIDTH + 1e-12) {
        return Err(Error::InvalidParams(format!(
            "lambda must lie in (-1, -1 + {MAX_WIDTH}], got {lambda}"
        )));
    }
    if !(q >= params.p - 1.0) {
        return Err(Error::InvalidParams(format!("q = {q} must be >= p - 1 = {}", params.p - 1.0)));
    }
    let grid = &u.grid;
    if grid.n != params.n {
        return Err(Error::InvalidParams("grid dimension does not match n".into()));
    }
    let h = grid.h;
    let frame = ReflectionFrame::new(Axis::E1, lambda, h)?;
    let w: Vec<f64> = grid
        .nodes()
        .map(|i| u.value(&frame.reflect_idx(&i)) - u.value(&i))
        .collect();
    let (w_min, x) = min_on_region(grid, &w, |i| frame.in_sigma(i) && norm(&grid.coord(i)) < 1.0)
        .map_err(|_| Error::NoNegativeMinimum)?;
    if w_min >= 0.0 {
        return Err(Error::NoNegativeMinimum);
    }

    let p = params.p;
    let ux = u.value(&x);
    let ulx = u.value(&frame.reflect_idx(&x));
    let kappa = lattice_kappa(params.n, params.sp(), p);
    let r = (auto_tail_radius(grid) / h).floor() as i64;
    let mut i_value = 0.0;
    for_each_offset(params.n, r, |z| {
        let yl = [x[0] + z[0], x[1] + z[1], x[2] + z[2]];
        if frame.in_sigma(&yl) || frame.on_plane(&yl) {
            return;
        }
        let d2 = dist2(&x, &yl);
        if d2 > r * r {
            return;
        }
        let y = frame.reflect_idx(&yl);
        let (uy, uly) = (u.value(&y), u.value(&yl));
        let xi = difference_quotient(ulx - uly, ux - uly, p);
        let eta = difference_quotient(ulx - uy, ux - uy, p);
        i_value += offset_weight(params, kappa, h, d2) * (xi + eta);
    });

    let delta = lambda + 1.0;
    let sp = params.sp();
    let c2_ratio = i_value * delta.powf(sp) / ux.powf(p - 2.0);
    let rhs_coefficient = q * ux.powf(q - 1.0);
    Ok(NarrowRegionProbe {
        lambda: frame.lambda,
        delta,
        x_min: x[..grid.n].to_vec(),
        x: grid.coord(&x)[..grid.n].to_vec(),
        w_min,
        u_min: ux,
        i_value,
        c2_ratio,
        lower_bound: i_value,
        rhs_coefficient,
        contradiction_holds: params.c * i_value > rhs_coefficient,
    })
}

/// The constructed profile family: a small multiple of `(1 - |x|^2)_+^s`
/// plus a bump `(1 - t^2)_+^2` of fixed height filling `Ω_λ` along `e1`,
/// centered at `x_1 = -1 + δ/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NarrowFamilyConfig {
    pub n: usize,
    pub h: f64,
    pub p: f64,
    pub s: f64,
    pub q: f64,
    pub deltas: Vec<f64>,
    pub base_amplitude: f64,
    pub bump_amplitude: f64,
}

impl Default for NarrowFamilyConfig {
    fn default() -> Self {
        NarrowFamilyConfig {
            n: 1,
            h: 1.0 / 4096.0,
            p: 3.0,
            s: 0.5,
            q: 2.0,
            deltas: vec![0.125, 0.0625, 0.03125, 0.015625, 0.0078125],
            base_amplitude: 0.05,
            bump_amplitude: 1.0,
        }
    }
}

pub fn narrow_region_profile(cfg: &NarrowFamilyConfig, delta: f64) -> Result<GridFunction> {
    let grid = Grid::around_unit_ball(cfg.n, cfg.h, 4)?;
    let center = -1.0 + delta / 2.0;
    let half = delta / 2.0;
    GridFunction::from_fn(grid, ExteriorRule::Zero, |x| {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        if r2 >= 1.0 {
            return 0.0;
        }
        let mut t2 = ((x[0] - center) / half).powi(2);
        for d in 1..cfg.n {
            t2 += (x[d] / 0.5).powi(2);
        }
        cfg.base_amplitude * (1.0 - r2).powf(cfg.s) + cfg.bump_amplitude * (1.0 - t2).max(0.0).powi(2)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NarrowRegionFamily {
    pub sp: f64,
    pub probes: Vec<NarrowRegionProbe>,
    /// Smallest `c2_ratio` over the family.
    pub c2: f64,
    /// Log-log slopes of `I` against `δ` between consecutive probes.
    pub slopes: Vec<f64>,
    /// Least-squares slope over the whole family.
    pub fitted_slope: f64,
}

impl NarrowRegionFamily {
    /// `lambda,delta,I,c2_ratio,rhs_coefficient,contradiction_holds`
    pub fn table_csv(&self) -> String {
        let mut csv = Csv::new(&["lambda", "delta", "I", "c2_ratio", "rhs_coefficient", "contradiction_holds"]);
        for pr in &self.probes {
            csv.row(&[
                Cell::F(pr.lambda),
                Cell::F(pr.delta),
                Cell::F(pr.i_value),
                Cell::F(pr.c2_ratio),
                Cell::F(pr.rhs_coefficient),
                Cell::B(pr.contradiction_holds),
            ]);
        }
        csv.finish()
    }
}

/// Runs [`narrow_region_probe`] on the profile family, one probe per width.
pub fn narrow_region_family(cfg: &NarrowFamilyConfig) -> Result<NarrowRegionFamily> {
    let params = KernelParams::new(cfg.n, cfg.s, cfg.p, 1.0)?;
    if cfg.deltas.len() < 2 {
        return Err(Error::InvalidParams("a family needs at least two widths".into()));
    }
    let mut probes: Vec<NarrowRegionProbe> = cfg
        .deltas
        .par_iter()
        .map(|&d| {
            let u = narrow_region_profile(cfg, d)?;
            narrow_region_probe(&u, -1.0 + d, &params, cfg.q)
        })
        .collect::<Result<_>>()?;
    let c2 = probes.iter().map(|p| p.c2_ratio).fold(f64::INFINITY, f64::min);
    let sp = params.sp();
    for pr in &mut probes {
        pr.lower_bound = c2 * pr.u_min.powf(params.p - 2.0) / pr.delta.powf(sp);
    }
    let logs: Vec<(f64, f64)> = probes.iter().map(|p| (p.delta.ln(), p.i_value.ln())).collect();
    let slopes = logs.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let m = logs.len() as f64;
    let (sx, sy) = logs.iter().fold((0.0, 0.0), |a, l| (a.0 + l.0, a.1 + l.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = logs
        .iter()
        .fold((0.0, 0.0), |a, l| (a.0 + (l.0 - mx) * (l.1 - my), a.1 + (l.0 - mx).powi(2)));
    Ok(NarrowRegionFamily {
        sp,
        probes,
        c2,
        slopes,
        fitted_slope: num / den,
    })
}
