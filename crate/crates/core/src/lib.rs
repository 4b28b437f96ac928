//! Lattice quadrature, solvers and maximum-principle experiments for the
//! fractional p-Laplacian `(-Δ)_p^s`.

pub mod error;
pub mod estimates;
pub mod io;
pub mod kernel;
pub mod lattice;
pub mod operator;
pub mod principles;
pub mod quad;
pub mod solver;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::KernelParams;
pub use lattice::{Axis, ExteriorRule, Grid, GridFunction, Idx, Point, ReflectionFrame};
pub use operator::{DecompositionResult, Operator, PointRecord, QuadratureConfig};
