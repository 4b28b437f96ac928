use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("InvalidRegime: s = {s} must be below 2(p-1)/p = {bound} for p = {p}")]
    InvalidRegime { p: f64, s: f64, bound: f64 },

    #[error("degenerate interval: t1 == t2")]
    DegenerateInterval,

    #[error("indeterminate mean-value point for p = 2")]
    Indeterminate,

    #[error("unsupported exponent p = {0}")]
    UnsupportedExponent(f64),

    #[error("MisalignedPlane: lambda = {lambda} is not a multiple of h/2 = {half_h}")]
    MisalignedPlane { lambda: f64, half_h: f64 },

    #[error("region contains no lattice node")]
    EmptyRegion,

    #[error("NearBoundary: node {node:?} lies within {near_radius} of the box edge")]
    NearBoundary { node: Vec<i64>, near_radius: f64 },

    #[error("tail radius {tail_radius} is smaller than the required {required}")]
    TailRadiusTooSmall { tail_radius: f64, required: f64 },

    #[error("HypothesisViolated: {0}")]
    HypothesisViolated(String),

    #[error("NotConverged after {iterations} iterations (relative residual {residual})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("NonPositiveIterate at node {node:?} on iteration {iteration}")]
    NonPositiveIterate { node: Vec<i64>, iteration: usize },

    #[error("DecayFitFailed: shell misfit {misfit} exceeds 5%")]
    DecayFitFailed { misfit: f64 },

    #[error("NoNegativeMinimum: w_lambda >= 0 throughout the narrow region")]
    NoNegativeMinimum,

    #[error("grid error: {0}")]
    Grid(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
