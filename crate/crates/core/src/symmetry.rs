//! Radial symmetry and monotonicity diagnostics, and the moving-plane scan
//! that locates the critical plane position `λ0`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{Axis, GridFunction, Point, ReflectionFrame, MAX_DIM};

/// Center of a symmetry report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CenterSpec {
    /// `"auto"`: the argmax node.
    Auto(AutoTag),
    Point(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl CenterSpec {
    pub fn auto() -> Self {
        CenterSpec::Auto(AutoTag::Auto)
    }
}

impl Default for CenterSpec {
    fn default() -> Self {
        CenterSpec::auto()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneEstimate {
    pub axis: Axis,
    pub lambda_0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub center: Vec<f64>,
    pub asymmetry: f64,
    pub monotonicity_violations: usize,
    pub radius_classes: usize,
    pub lambda_0: Vec<PlaneEstimate>,
}

/// Relative tolerance for "increasing outward" and "negative" decisions.
pub const SCAN_TOL: f64 = 1e-8;

/// Spherical averages over exact lattice radius classes.
///
/// Classes are keyed by `round(4 |x - c|^2 / h^2)`, exact for centers on
/// the half-lattice.
pub fn symmetry_report(u: &GridFunction, center: &CenterSpec) -> SymmetryReport {
    let grid = &u.grid;
    let n = grid.n;
    let c: Point = match center {
        CenterSpec::Auto(_) => grid.coord(&crate::solver::argmax_node(u)),
        CenterSpec::Point(v) => {
            let mut c = [0.0; MAX_DIM];
            for (d, x) in v.iter().take(n).enumerate() {
                c[d] = *x;
            }
            c
        }
    };
    let h = grid.h;
    let key_of = |k: usize| {
        let x = grid.coord(&grid.unflat(k));
        let mut r2 = 0.0;
        for d in 0..n {
            r2 += (x[d] - c[d]).powi(2);
        }
        (4.0 * r2 / (h * h)).round() as i64
    };
    let keys: Vec<i64> = (0..grid.len()).map(key_of).collect();
    let mut classes: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for (k, &key) in keys.iter().enumerate() {
        let e = classes.entry(key).or_insert((0.0, 0));
        e.0 += u.values[k];
        e.1 += 1;
    }
    let max_u = u.max_value();
    let scale = if max_u > 0.0 { max_u } else { u.max_abs().max(1e-300) };
    let mut worst: f64 = 0.0;
    for (k, &key) in keys.iter().enumerate() {
        let (sum, cnt) = classes[&key];
        worst = worst.max((u.values[k] - sum / cnt as f64).abs());
    }
    let means: Vec<f64> = classes.values().map(|(s, c)| s / *c as f64).collect();
    let violations = means
        .windows(2)
        .filter(|w| w[1] > w[0] + SCAN_TOL * scale)
        .count();
    SymmetryReport {
        center: c[..n].to_vec(),
        asymmetry: worst / scale,
        monotonicity_violations: violations,
        radius_classes: classes.len(),
        lambda_0: Vec::new(),
    }
}

/// One point `(λ, min w_λ)` of a scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub lambda: f64,
    pub min_w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneScan {
    pub axis: Axis,
    pub lambda_0: f64,
    pub curve: Vec<ScanPoint>,
}

/// Sweeps lattice-aligned planes across the whole box in steps of `h/2`,
/// recording `m(λ) = min over Σ_λ ∩ box of w_λ`; `λ0` is the largest `λ`
/// such that `m(μ) ≥ -1e-8 max u` for every scanned `μ ≤ λ`.
pub fn moving_plane_scan(u: &GridFunction, axis: Axis) -> Result<PlaneScan> {
    let grid = &u.grid;
    if axis.dim >= grid.n {
        return Err(crate::error::Error::InvalidParams(format!(
            "axis e_{} does not exist in dimension {}",
            axis.dim + 1,
            grid.n
        )));
    }
    let (lo, hi) = grid.extent[axis.dim];
    let (plo, phi) = if axis.sign > 0 { (lo, hi) } else { (-hi, -lo) };
    // Σ_λ ∩ box is nonempty once 2λ/h > 2 plo
    let steps: Vec<i64> = (2 * plo + 1..=2 * phi).collect();
    let tol = SCAN_TOL * u.max_value().abs().max(u.max_abs()).max(1e-300);
    let curve: Vec<ScanPoint> = steps
        .par_iter()
        .map(|&twice| {
            let frame = ReflectionFrame::from_half_steps(axis, twice, grid.h);
            let mut m = f64::INFINITY;
            for (k, v) in u.values.iter().enumerate() {
                let i = grid.unflat(k);
                if frame.in_sigma(&i) {
                    m = m.min(u.value(&frame.reflect_idx(&i)) - v);
                }
            }
            ScanPoint {
                lambda: frame.lambda,
                min_w: m,
            }
        })
        .collect();
    let mut lambda_0 = curve.first().map(|c| c.lambda).unwrap_or(0.0);
    for pt in &curve {
        if pt.min_w < -tol {
            break;
        }
        lambda_0 = pt.lambda;
    }
    Ok(PlaneScan {
        axis,
        lambda_0,
        curve,
    })
}

/// Report plus a scan in every signed axis direction.
pub fn full_symmetry_report(u: &GridFunction, center: &CenterSpec) -> Result<SymmetryReport> {
    let mut report = symmetry_report(u, center);
    for axis in Axis::all(u.grid.n) {
        let scan = moving_plane_scan(u, axis)?;
        report.lambda_0.push(PlaneEstimate {
            axis,
            lambda_0: scan.lambda_0,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{norm, ExteriorRule, Grid};

    fn radial(grid: &Grid, c: [f64; 3]) -> GridFunction {
        GridFunction::from_fn(grid.clone(), ExteriorRule::Zero, |x| {
            let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
            (1.0 - norm(&d).powi(2)).max(0.0).powi(2)
        })
        .unwrap()
    }

    #[test]
    fn radial_data_is_symmetric() {
        let g = Grid::cube(2, 0.125, 12).unwrap();
        let r = symmetry_report(&radial(&g, [0.0; 3]), &CenterSpec::auto());
        assert!(r.asymmetry < 1e-14, "{}", r.asymmetry);
        assert_eq!(r.monotonicity_violations, 0);
        assert_eq!(r.center, vec![0.0, 0.0]);
    }

    #[test]
    fn asymmetry_linear_in_perturbation() {
        let g = Grid::cube(2, 0.125, 12).unwrap();
        let a: Vec<f64> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|eps| {
                let u = GridFunction::from_fn(g.clone(), ExteriorRule::Zero, |x| (-norm(x).powi(2)).exp() + eps * x[0]).unwrap();
                symmetry_report(&u, &CenterSpec::Point(vec![0.0, 0.0])).asymmetry
            })
            .collect();
        assert!((a[1] / a[0] - 10.0).abs() < 0.5 && (a[2] / a[1] - 10.0).abs() < 1.5, "{a:?}");
    }

    #[test]
    fn scale_invariance_of_auto_center() {
        let g = Grid::cube(2, 0.125, 12).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::Zero, |x| (-(x[0] - 0.25).powi(2) - 2.0 * x[1].powi(2)).exp()).unwrap();
        let a = symmetry_report(&u, &CenterSpec::auto());
        let b = symmetry_report(&u.scaled(7.5), &CenterSpec::auto());
        assert_eq!(a.center, b.center);
        assert!((a.asymmetry - b.asymmetry).abs() < 1e-15);
        assert_eq!(a.monotonicity_violations, b.monotonicity_violations);
    }

    #[test]
    fn scan_finds_center() {
        let g = Grid::cube(2, 0.125, 12).unwrap();
        for axis in Axis::all(2) {
            let s = moving_plane_scan(&radial(&g, [0.0; 3]), axis).unwrap();
            assert!(s.lambda_0.abs() <= 0.0625 + 1e-12, "{axis:?} {}", s.lambda_0);
        }
        let s = moving_plane_scan(&radial(&g, [0.25, 0.0, 0.0]), Axis::E1).unwrap();
        assert!((s.lambda_0 - 0.25).abs() <= 0.0625 + 1e-12);
        let s = moving_plane_scan(&radial(&g, [0.25, 0.0, 0.0]), Axis::new(0, -1).unwrap()).unwrap();
        assert!((s.lambda_0 + 0.25).abs() <= 0.0625 + 1e-12);
    }

    #[test]
    fn two_bumps_stop_before_midpoint() {
        let g = Grid::cube(1, 1.0 / 32.0, 64).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::Zero, |x| {
            (-(x[0] + 0.6).powi(2) * 20.0).exp() + 2.0 * (-(x[0] - 0.6).powi(2) * 20.0).exp()
        })
        .unwrap();
        let s = moving_plane_scan(&u, Axis::E1).unwrap();
        assert!(s.lambda_0 < 0.0);
        assert!(s.curve.iter().any(|p| p.lambda > s.lambda_0 && p.min_w < 0.0));
    }

    #[test]
    fn center_spec_serde() {
        let a: CenterSpec = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(a, CenterSpec::auto());
        let p: CenterSpec = serde_json::from_str("[0.5, 0.0]").unwrap();
        assert_eq!(p, CenterSpec::Point(vec![0.5, 0.0]));
    }
}
