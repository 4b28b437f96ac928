//! Uniform lattices, gridded functions with an exterior extension rule, and
//! the reflection machinery of the moving-plane method.
//!
//! Nodes sit at `x = i * h` for integer multi-indices `i`; a plane offset is
//! kept as the integer `2 * lambda / h`, so reflecting a node is integer
//! arithmetic and therefore an exact involution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Lattice multi-index; components past `n` are zero.
pub type Idx = [i64; MAX_DIM];
/// Point in space; components past `n` are zero.
pub type Point = [f64; MAX_DIM];

pub fn norm(p: &Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    norm(&d)
}

/// Squared integer distance between two multi-indices.
#[inline]
pub fn dist2(a: &Idx, b: &Idx) -> i64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

/// A box of lattice nodes, `extent[d] = (lo, hi)` inclusive on each axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub extent: Vec<(i64, i64)>,
}

impl Grid {
    pub fn new(n: usize, h: f64, extent: Vec<(i64, i64)>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(Error::Grid(format!("dimension must be 1..=3, got {n}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Grid(format!("spacing must be positive, got {h}")));
        }
        if extent.len() != n {
            return Err(Error::Grid(format!(
                "extent has {} axes for a {n}-dimensional grid",
                extent.len()
            )));
        }
        if extent.iter().any(|&(lo, hi)| lo > hi) {
            return Err(Error::Grid("extent with lo > hi".into()));
        }
        Ok(Grid { n, h, extent })
    }

    /// The box `[-m h, m h]^n`.
    pub fn cube(n: usize, h: f64, m: i64) -> Result<Self> {
        Grid::new(n, h, vec![(-m, m); n])
    }

    /// Box around the unit ball with `margin` extra nodes (at least 4) on
    /// each side.
    pub fn around_unit_ball(n: usize, h: f64, margin: i64) -> Result<Self> {
        let margin = margin.max(4);
        let m = (1.0 / h).ceil() as i64 + margin;
        Grid::cube(n, h, m)
    }

    /// Smallest box containing `[-half_width, half_width]^n`.
    pub fn with_half_width(n: usize, h: f64, half_width: f64) -> Result<Self> {
        let m = (half_width / h - 1e-9).ceil() as i64;
        Grid::cube(n, h, m)
    }

    pub fn len(&self) -> usize {
        self.extent
            .iter()
            .map(|&(lo, hi)| (hi - lo + 1) as usize)
            .product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, idx: &Idx) -> bool {
        (0..self.n).all(|d| idx[d] >= self.extent[d].0 && idx[d] <= self.extent[d].1)
            && (self.n..MAX_DIM).all(|d| idx[d] == 0)
    }

    /// Row-major flat offset (last axis fastest).
    pub fn flat(&self, idx: &Idx) -> Option<usize> {
        if !self.contains(idx) {
            return None;
        }
        let mut off = 0usize;
        for d in 0..self.n {
            let (lo, hi) = self.extent[d];
            off = off * (hi - lo + 1) as usize + (idx[d] - lo) as usize;
        }
        Some(off)
    }

    pub fn unflat(&self, mut off: usize) -> Idx {
        let mut idx = [0i64; MAX_DIM];
        for d in (0..self.n).rev() {
            let (lo, hi) = self.extent[d];
            let len = (hi - lo + 1) as usize;
            idx[d] = lo + (off % len) as i64;
            off /= len;
        }
        idx
    }

    pub fn coord(&self, idx: &Idx) -> Point {
        let mut x = [0.0; MAX_DIM];
        for d in 0..self.n {
            x[d] = idx[d] as f64 * self.h;
        }
        x
    }

    /// All nodes in row-major order.
    pub fn nodes(&self) -> impl Iterator<Item = Idx> + '_ {
        (0..self.len()).map(move |k| self.unflat(k))
    }

    /// Distance from a node to the nearest box face.
    pub fn distance_to_edge(&self, idx: &Idx) -> f64 {
        (0..self.n)
            .map(|d| (idx[d] - self.extent[d].0).min(self.extent[d].1 - idx[d]))
            .min()
            .unwrap_or(0) as f64
            * self.h
    }

    /// Largest distance from `x` to a box corner.
    pub fn circumradius_from(&self, x: &Point) -> f64 {
        let mut r2 = 0.0;
        for d in 0..self.n {
            let lo = self.extent[d].0 as f64 * self.h;
            let hi = self.extent[d].1 as f64 * self.h;
            let far = (x[d] - lo).abs().max((x[d] - hi).abs());
            r2 += far * far;
        }
        r2.sqrt()
    }

    /// Lattice node closest to a point.
    pub fn nearest(&self, x: &Point) -> Idx {
        let mut idx = [0i64; MAX_DIM];
        for d in 0..self.n {
            idx[d] = (x[d] / self.h).round() as i64;
        }
        idx
    }

    /// The grid shifted by a lattice vector.
    pub fn translated(&self, shift: &Idx) -> Grid {
        Grid {
            n: self.n,
            h: self.h,
            extent: (0..self.n)
                .map(|d| (self.extent[d].0 + shift[d], self.extent[d].1 + shift[d]))
                .collect(),
        }
    }
}

/// Values assumed outside the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ExteriorRule {
    Zero,
    /// `u(y) = A |y - center|^{-alpha}`.
    PowerDecay {
        #[serde(rename = "A")]
        amplitude: f64,
        alpha: f64,
        #[serde(default = "origin")]
        center: Vec<f64>,
    },
    /// `u(y) = value`; only meaningful for sanity checks of the quadrature.
    Constant { value: f64 },
}

fn origin() -> Vec<f64> {
    vec![0.0; MAX_DIM]
}

impl ExteriorRule {
    pub fn power_decay(amplitude: f64, alpha: f64) -> Result<Self> {
        Self::power_decay_about(amplitude, alpha, [0.0; MAX_DIM])
    }

    pub fn power_decay_about(amplitude: f64, alpha: f64, center: Point) -> Result<Self> {
        let rule = ExteriorRule::PowerDecay {
            amplitude,
            alpha,
            center: center.to_vec(),
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExteriorRule::PowerDecay {
                amplitude, alpha, ..
            } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(Error::Grid(format!(
                        "power-decay amplitude must be >= 0, got {amplitude}"
                    )));
                }
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::Grid(format!(
                        "power-decay exponent must be > 0, got {alpha}"
                    )));
                }
                Ok(())
            }
            ExteriorRule::Constant { value } if !value.is_finite() => {
                Err(Error::Grid("constant exterior must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn value_at(&self, x: &Point) -> f64 {
        match self {
            ExteriorRule::Zero => 0.0,
            ExteriorRule::Constant { value } => *value,
            ExteriorRule::PowerDecay {
                amplitude,
                alpha,
                center,
            } => {
                let mut c = [0.0; MAX_DIM];
                for (k, v) in center.iter().take(MAX_DIM).enumerate() {
                    c[k] = *v;
                }
                let r = dist(x, &c);
                if r == 0.0 {
                    *amplitude
                } else {
                    amplitude * r.powf(-alpha)
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExteriorRule::Zero)
    }

    /// Constant-valued exteriors (including zero).
    pub fn constant_value(&self) -> Option<f64> {
        match self {
            ExteriorRule::Zero => Some(0.0),
            ExteriorRule::Constant { value } => Some(*value),
            ExteriorRule::PowerDecay { .. } => None,
        }
    }
}

/// Lattice values plus the rule used beyond the box.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub exterior: ExteriorRule,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>, exterior: ExteriorRule) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Grid(format!(
                "non-finite value at node {:?}",
                &grid.unflat(k)[..grid.n]
            )));
        }
        exterior.validate()?;
        Ok(GridFunction {
            grid,
            values,
            exterior,
        })
    }

    pub fn from_fn(grid: Grid, exterior: ExteriorRule, f: impl Fn(&Point) -> f64) -> Result<Self> {
        let values = grid.nodes().map(|i| f(&grid.coord(&i))).collect();
        GridFunction::new(grid, values, exterior)
    }

    pub fn zeros(grid: Grid) -> Self {
        let len = grid.len();
        GridFunction {
            grid,
            values: vec![0.0; len],
            exterior: ExteriorRule::Zero,
        }
    }

    /// Value at any lattice node; nodes outside the box use the exterior rule.
    #[inline]
    pub fn value(&self, idx: &Idx) -> f64 {
        match self.grid.flat(idx) {
            Some(k) => self.values[k],
            None => self.exterior.value_at(&self.grid.coord(idx)),
        }
    }

    /// Value at an arbitrary point outside the box.
    pub fn far_value(&self, x: &Point) -> f64 {
        self.exterior.value_at(x)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, alpha: f64) -> GridFunction {
        let exterior = match &self.exterior {
            ExteriorRule::PowerDecay {
                amplitude,
                alpha: a,
                center,
            } => ExteriorRule::PowerDecay {
                amplitude: amplitude * alpha.abs(),
                alpha: *a,
                center: center.clone(),
            },
            ExteriorRule::Constant { value } => ExteriorRule::Constant {
                value: value * alpha,
            },
            ExteriorRule::Zero => ExteriorRule::Zero,
        };
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * alpha).collect(),
            exterior,
        }
    }

    /// Checks the Dirichlet condition `u = 0` outside the unit ball.
    pub fn check_ball_dirichlet(&self) -> Result<()> {
        if !self.exterior.is_zero() {
            return Err(Error::Grid("ball problems need a Zero exterior".into()));
        }
        for (k, v) in self.values.iter().enumerate() {
            let x = self.grid.coord(&self.grid.unflat(k));
            if norm(&x) >= 1.0 && *v != 0.0 {
                return Err(Error::Grid(format!(
                    "nonzero value {v} at |x| >= 1 (node {:?})",
                    &self.grid.unflat(k)[..self.grid.n]
                )));
            }
        }
        Ok(())
    }
}

/// A lattice direction `sign * e_dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axis {
    pub dim: usize,
    pub sign: i8,
}

impl Axis {
    pub const E1: Axis = Axis { dim: 0, sign: 1 };

    pub fn new(dim: usize, sign: i8) -> Result<Self> {
        if dim >= MAX_DIM || (sign != 1 && sign != -1) {
            return Err(Error::InvalidParams(format!(
                "axis must be +/- e_k with k < 3 (got dim {dim}, sign {sign})"
            )));
        }
        Ok(Axis { dim, sign })
    }

    /// The four (or two, or six) signed coordinate directions.
    pub fn all(n: usize) -> Vec<Axis> {
        (0..n)
            .flat_map(|dim| [Axis { dim, sign: 1 }, Axis { dim, sign: -1 }])
            .collect()
    }

    #[inline]
    pub fn project(&self, x: &Point) -> f64 {
        self.sign as f64 * x[self.dim]
    }

    #[inline]
    pub fn project_idx(&self, idx: &Idx) -> i64 {
        self.sign as i64 * idx[self.dim]
    }
}

/// The plane `T = {x . axis = lambda}` and its half-space
/// `Sigma = {x . axis < lambda}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameWire", into = "FrameWire")]
pub struct ReflectionFrame {
    pub axis: Axis,
    pub lambda: f64,
    h: f64,
    /// `2 lambda / h`, an integer for lattice-aligned planes.
    twice: i64,
}

#[derive(Serialize, Deserialize)]
struct FrameWire {
    axis: Axis,
    lambda: f64,
    h: f64,
}

impl TryFrom<FrameWire> for ReflectionFrame {
    type Error = Error;
    fn try_from(w: FrameWire) -> Result<Self> {
        ReflectionFrame::new(w.axis, w.lambda, w.h)
    }
}

impl From<ReflectionFrame> for FrameWire {
    fn from(f: ReflectionFrame) -> Self {
        FrameWire {
            axis: f.axis,
            lambda: f.lambda,
            h: f.h,
        }
    }
}

impl ReflectionFrame {
    /// Builds a frame for lattice spacing `h`; `lambda` must be a multiple of
    /// `h / 2` so that the lattice maps onto itself.
    pub fn new(axis: Axis, lambda: f64, h: f64) -> Result<Self> {
        let t = 2.0 * lambda / h;
        let twice = t.round();
        if (t - twice).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::MisalignedPlane {
                lambda,
                half_h: h / 2.0,
            });
        }
        Ok(ReflectionFrame {
            axis,
            lambda: twice * h / 2.0,
            h,
            twice: twice as i64,
        })
    }

    /// Frame from the integer plane position `2 lambda / h`.
    pub fn from_half_steps(axis: Axis, twice: i64, h: f64) -> Self {
        ReflectionFrame {
            axis,
            lambda: twice as f64 * h / 2.0,
            h,
            twice,
        }
    }

    pub fn half_steps(&self) -> i64 {
        self.twice
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `x + 2(lambda - x . axis) axis`.
    pub fn reflect(&self, x: &Point) -> Point {
        let mut y = *x;
        let d = self.axis.dim;
        y[d] = 2.0 * self.lambda * self.axis.sign as f64 - x[d];
        y
    }

    #[inline]
    pub fn reflect_idx(&self, idx: &Idx) -> Idx {
        let mut j = *idx;
        let d = self.axis.dim;
        j[d] = self.axis.sign as i64 * self.twice - idx[d];
        j
    }

    /// Strictly inside `Sigma`.
    #[inline]
    pub fn in_sigma(&self, idx: &Idx) -> bool {
        2 * self.axis.project_idx(idx) < self.twice
    }

    #[inline]
    pub fn on_plane(&self, idx: &Idx) -> bool {
        2 * self.axis.project_idx(idx) == self.twice
    }

    /// Distance `lambda - x . axis` from a node to the plane (positive in
    /// `Sigma`).
    pub fn delta(&self, idx: &Idx) -> f64 {
        (self.twice - 2 * self.axis.project_idx(idx)) as f64 * self.h / 2.0
    }
}

/// `u(x^lambda)` as a lattice field.
#[derive(Clone, Copy, Debug)]
pub struct Reflected<'a> {
    pub u: &'a GridFunction,
    pub frame: ReflectionFrame,
}

impl Reflected<'_> {
    #[inline]
    pub fn value(&self, idx: &Idx) -> f64 {
        self.u.value(&self.frame.reflect_idx(idx))
    }

    /// `u_lambda` sampled on the box of `u` as a plain grid function, with
    /// the exterior taken from `u` (exact only when `u`'s exterior is
    /// reflection invariant, e.g. Zero far from the plane).
    pub fn sample(&self) -> Vec<f64> {
        self.u.grid.nodes().map(|i| self.value(&i)).collect()
    }
}

/// `w_lambda(x) = u(x^lambda) - u(x)` on the nodes of the box.
#[derive(Clone, Debug)]
pub struct WLambda {
    pub grid: Grid,
    pub frame: ReflectionFrame,
    pub values: Vec<f64>,
}

impl WLambda {
    /// Value at any lattice node.
    pub fn at(u: &GridFunction, frame: &ReflectionFrame, idx: &Idx) -> f64 {
        u.value(&frame.reflect_idx(idx)) - u.value(idx)
    }

    pub fn value(&self, idx: &Idx) -> Option<f64> {
        self.grid.flat(idx).map(|k| self.values[k])
    }

    /// Minimum over the nodes of `Sigma` in the box that satisfy `pred`.
    pub fn min_in_sigma(&self, pred: impl Fn(&Idx) -> bool) -> Result<(f64, Idx)> {
        min_on_region(&self.grid, &self.values, |i| self.frame.in_sigma(i) && pred(i))
    }
}

pub fn w_lambda(u: &GridFunction, frame: &ReflectionFrame) -> Result<WLambda> {
    if (frame.h() - u.grid.h).abs() > 1e-15 * u.grid.h {
        return Err(Error::MisalignedPlane {
            lambda: frame.lambda,
            half_h: u.grid.h / 2.0,
        });
    }
    let values = u
        .grid
        .nodes()
        .map(|i| WLambda::at(u, frame, &i))
        .collect();
    Ok(WLambda {
        grid: u.grid.clone(),
        frame: *frame,
        values,
    })
}

/// Minimum of `values` over the nodes satisfying `region`; ties resolve to
/// the lexicographically smallest multi-index (row-major order).
pub fn min_on_region(
    grid: &Grid,
    values: &[f64],
    region: impl Fn(&Idx) -> bool,
) -> Result<(f64, Idx)> {
    let mut best: Option<(f64, Idx)> = None;
    for (k, &v) in values.iter().enumerate() {
        let idx = grid.unflat(k);
        if !region(&idx) {
            continue;
        }
        match best {
            Some((b, _)) if v >= b => {}
            _ => best = Some((v, idx)),
        }
    }
    best.ok_or(Error::EmptyRegion)
}

/// Serializable region predicates over points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Region {
    All,
    /// Open ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// `lo < x_dim < hi`.
    Slab { dim: usize, lo: f64, hi: f64 },
    Intersection { parts: Vec<Region> },
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Region {
        Region::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Region::All => true,
            Region::Ball { center, radius } => {
                let mut c = [0.0; MAX_DIM];
                for (k, v) in center.iter().take(MAX_DIM).enumerate() {
                    c[k] = *v;
                }
                dist(x, &c) < *radius
            }
            Region::Slab { dim, lo, hi } => x[*dim] > *lo && x[*dim] < *hi,
            Region::Intersection { parts } => parts.iter().all(|r| r.contains(x)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(v: &[f64]) -> Point {
        let mut p = [0.0; MAX_DIM];
        p[..v.len()].copy_from_slice(v);
        p
    }

    #[test]
    fn reflect_examples() {
        let f = ReflectionFrame::new(Axis::E1, 0.0, 0.25).unwrap();
        assert_eq!(f.reflect(&pt(&[-1.0, 0.0])), pt(&[1.0, 0.0]));
        let f = ReflectionFrame::new(Axis::E1, 0.5, 0.25).unwrap();
        assert_eq!(f.reflect(&pt(&[0.5, 0.3])), pt(&[0.5, 0.3]));
        assert_eq!(f.reflect(&pt(&[0.25, 0.5])), pt(&[0.75, 0.5]));
    }

    #[test]
    fn misaligned_plane() {
        assert!(matches!(
            ReflectionFrame::new(Axis::E1, 0.1, 0.25),
            Err(Error::MisalignedPlane { .. })
        ));
        assert!(ReflectionFrame::new(Axis::E1, 0.125, 0.25).is_ok());
    }

    #[test]
    fn negative_axis_reflection() {
        let axis = Axis::new(0, -1).unwrap();
        // plane x . (-e1) = 0.25, i.e. x1 = -0.25
        let f = ReflectionFrame::new(axis, 0.25, 0.125).unwrap();
        let y = f.reflect(&pt(&[0.0, 0.0]));
        assert!((y[0] + 0.5).abs() < 1e-15);
        let j = f.reflect_idx(&[0, 0, 0]);
        assert_eq!(j, [-4, 0, 0]);
        assert!(f.in_sigma(&[1, 0, 0]));
        assert!(!f.in_sigma(&[-3, 0, 0]));
    }

    #[test]
    fn w_lambda_examples() {
        let g = Grid::cube(1, 0.25, 8).unwrap();
        let u = GridFunction::from_fn(g.clone(), ExteriorRule::Zero, |x| x[0]).unwrap();
        let f = ReflectionFrame::new(Axis::E1, 0.0, 0.25).unwrap();
        let w = w_lambda(&u, &f).unwrap();
        assert_eq!(w.value(&[-4, 0, 0]), Some(2.0));

        let sym = GridFunction::from_fn(g.clone(), ExteriorRule::Zero, |x| (1.0 - x[0] * x[0]).max(0.0)).unwrap();
        let w = w_lambda(&sym, &f).unwrap();
        assert!(g.nodes().filter(|i| f.in_sigma(i)).all(|i| w.value(&i) == Some(0.0)));

        let s = 0.5;
        let h = 1.0 / 64.0;
        let g = Grid::around_unit_ball(1, h, 8).unwrap();
        let u = GridFunction::from_fn(g, ExteriorRule::Zero, |x| (1.0 - x[0] * x[0]).max(0.0).powf(s)).unwrap();
        let f = ReflectionFrame::new(Axis::E1, -0.5, h).unwrap();
        let w = w_lambda(&u, &f).unwrap();
        let v = w.value(&[-48, 0, 0]).unwrap();
        let expect = (1.0f64 - 0.0625).powf(s) - (1.0f64 - 0.5625).powf(s);
        assert!((v - expect).abs() < 1e-15 && v > 0.0);
    }

    #[test]
    fn min_on_region_examples() {
        let g = Grid::cube(2, 0.25, 4).unwrap();
        let zero = vec![0.0; g.len()];
        let (v, i) = min_on_region(&g, &zero, |_| true).unwrap();
        assert_eq!((v, i), (0.0, [-4, -4, 0]));

        let lin: Vec<f64> = g.nodes().map(|i| g.coord(&i)[0]).collect();
        let f = ReflectionFrame::new(Axis::E1, 0.0, 0.25).unwrap();
        let (v, i) = min_on_region(&g, &lin, |i| f.in_sigma(i)).unwrap();
        assert_eq!(v, -1.0);
        assert_eq!(i, [-4, -4, 0]);

        assert_eq!(
            min_on_region(&g, &lin, |_| false),
            Err(Error::EmptyRegion)
        );
    }

    #[test]
    fn exterior_queries() {
        let g = Grid::cube(2, 0.5, 2).unwrap();
        let u = GridFunction::zeros(g.clone());
        assert_eq!(u.value(&[10, -7, 0]), 0.0);
        let u = GridFunction::new(g, vec![1.0; 25], ExteriorRule::power_decay(2.0, 1.5).unwrap()).unwrap();
        let v = u.value(&[8, 0, 0]);
        assert!((v - 2.0 * 4.0f64.powf(-1.5)).abs() < 1e-15);
        assert!(ExteriorRule::power_decay(1.0, 0.0).is_err());
    }

    #[test]
    fn flat_roundtrip_and_order() {
        let g = Grid::new(3, 0.1, vec![(-1, 2), (0, 1), (-2, 0)]).unwrap();
        for k in 0..g.len() {
            assert_eq!(g.flat(&g.unflat(k)), Some(k));
        }
        assert_eq!(g.unflat(0), [-1, 0, -2]);
        assert_eq!(g.unflat(1), [-1, 0, -1]);
    }

    #[test]
    fn ball_dirichlet_check() {
        let g = Grid::around_unit_ball(2, 0.125, 4).unwrap();
        let u = GridFunction::from_fn(g.clone(), ExteriorRule::Zero, |x| (1.0 - norm(x).powi(2)).max(0.0)).unwrap();
        assert!(u.check_ball_dirichlet().is_ok());
        let bad = GridFunction::from_fn(g, ExteriorRule::Zero, |_| 1.0).unwrap();
        assert!(bad.check_ball_dirichlet().is_err());
    }
}
