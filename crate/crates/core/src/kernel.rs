//! The scalar nonlinearity `G(t) = |t|^{p-2} t` and the mean-value machinery
//! built on top of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters `(n, s, p, C)` of the nonlocal operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub n: usize,
    pub s: f64,
    pub p: f64,
    /// Normalization constant. Every sign or ratio test is invariant under
    /// positive rescaling, so 1 is the default.
    #[serde(default = "default_c", rename = "C", alias = "c")]
    pub c: f64,
}

fn default_c() -> f64 {
    1.0
}

impl KernelParams {
    /// Validates and builds a parameter set.
    ///
    /// For `1 < p < 2` the paired near-field quadrature only converges when
    /// `s < 2(p-1)/p`; other configurations are rejected with `InvalidRegime`.
    pub fn new(n: usize, s: f64, p: f64, c: f64) -> Result<Self> {
        let params = KernelParams { n, s, p, c };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(Error::InvalidParams(format!(
                "dimension n must be 1, 2 or 3 (got {})",
                self.n
            )));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParams(format!(
                "fractional order s must lie in (0, 1) (got {})",
                self.s
            )));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "exponent p must be > 1 (got {})",
                self.p
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "normalization C must be positive (got {})",
                self.c
            )));
        }
        if self.is_singular() {
            let bound = regime_bound(self.p);
            if self.s >= bound {
                return Err(Error::InvalidRegime {
                    p: self.p,
                    s: self.s,
                    bound,
                });
            }
        }
        Ok(())
    }

    /// `1 < p < 2`: `G'` blows up at the origin.
    pub fn is_singular(&self) -> bool {
        self.p < 2.0
    }

    /// `p > 2`: `G'` vanishes at the origin.
    pub fn is_degenerate(&self) -> bool {
        self.p > 2.0
    }

    /// The kernel exponent `sp`.
    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    pub fn g(&self, t: f64) -> f64 {
        g_apply(t, self.p)
    }
}

/// Upper bound on `s` admitted by the paired quadrature when `1 < p < 2`.
pub fn regime_bound(p: f64) -> f64 {
    2.0 * (p - 1.0) / p
}

/// `G(t) = |t|^{p-2} t`, with `G(0) = 0` for every `p > 1`.
#[inline]
pub fn g_apply(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t
    } else if p == 3.0 {
        t * t.abs()
    } else if t == 0.0 {
        0.0
    } else {
        t.abs().powf(p - 1.0).copysign(t)
    }
}

/// Value of `G'(t)`, which is unbounded at `t = 0` when `p < 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Derivative {
    Finite(f64),
    Infinite,
}

impl Derivative {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Derivative::Infinite)
    }

    /// Collapses the marker onto `f64::INFINITY`.
    pub fn value(&self) -> f64 {
        match *self {
            Derivative::Finite(v) => v,
            Derivative::Infinite => f64::INFINITY,
        }
    }
}

/// `G'(t) = (p-1)|t|^{p-2}`.
pub fn g_prime(t: f64, p: f64) -> Derivative {
    if p == 2.0 {
        Derivative::Finite(1.0)
    } else if t == 0.0 {
        if p > 2.0 {
            Derivative::Finite(0.0)
        } else {
            Derivative::Infinite
        }
    } else if p == 3.0 {
        Derivative::Finite(2.0 * t.abs())
    } else {
        Derivative::Finite((p - 1.0) * t.abs().powf(p - 2.0))
    }
}

/// `G'` as a plain float, used by Newton steps. Infinite at 0 for `p < 2`.
#[inline]
pub(crate) fn g_prime_f64(t: f64, p: f64) -> f64 {
    g_prime(t, p).value()
}

/// Difference quotient `(G(b) - G(a)) / (b - a)`, equal to `G'(ξ)` for some ξ
/// between `a` and `b`; falls back to `G'(a)` when `a == b`.
#[inline]
pub fn difference_quotient(a: f64, b: f64, p: f64) -> f64 {
    if a == b {
        return g_prime_f64(a, p);
    }
    if p == 2.0 {
        return 1.0;
    }
    if p == 3.0 && a.signum() == b.signum() {
        return (a + b).abs();
    }
    (g_apply(b, p) - g_apply(a, p)) / (b - a)
}

/// Result of inverting the mean value theorem for `G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeanValue {
    /// `|ξ|` with `G'(ξ)(t2 - t1) = G(t2) - G(t1)`.
    Magnitude(f64),
    /// `p = 2`: `G'` is constant, every ξ works.
    Any,
}

/// Magnitude of the mean-value point ξ between `t1` and `t2`.
///
/// Only `|ξ|` is returned; the sign never enters the lemma's inequality.
pub fn mean_value_xi(t1: f64, t2: f64, p: f64) -> Result<MeanValue> {
    if t1 == t2 {
        return Err(Error::DegenerateInterval);
    }
    if p == 2.0 {
        return Ok(MeanValue::Any);
    }
    let slope = (g_apply(t2, p) - g_apply(t1, p)) / (t2 - t1);
    let xi = (slope / (p - 1.0)).powf(1.0 / (p - 2.0));
    Ok(MeanValue::Magnitude(xi))
}

/// `mean_value_xi` for `p != 2`, unwrapped.
fn xi_magnitude(t1: f64, t2: f64, p: f64) -> f64 {
    match mean_value_xi(t1, t2, p) {
        Ok(MeanValue::Magnitude(x)) => x,
        _ => unreachable!("caller excludes t1 == t2 and p == 2"),
    }
}

/// Deterministic normalized pairs `(t1, t2)` with `max(|t1|, |t2|) = 1` and
/// `t1 != t2`, taken at the midpoints of `samples` equal angular cells of the
/// unit circle and pushed radially onto the unit square.
pub fn normalized_pairs(samples: usize) -> impl Iterator<Item = (f64, f64)> {
    let step = std::f64::consts::TAU / samples as f64;
    (0..samples).filter_map(move |k| {
        let theta = (k as f64 + 0.5) * step;
        let (sin, cos) = theta.sin_cos();
        let scale = cos.abs().max(sin.abs());
        let (t1, t2) = (cos / scale, sin / scale);
        (t1 != t2).then_some((t1, t2))
    })
}

/// Infimum of `|ξ| / max(|t1|, |t2|)` over the normalized pair set, for any
/// `p != 2`. Used to explore the regime `1 < p < 2` where the lemma's constant
/// is not asserted.
pub fn lemma_ratio_infimum(p: f64, samples: usize) -> Result<f64> {
    if p == 2.0 {
        return Err(Error::UnsupportedExponent(p));
    }
    if samples < 1000 {
        return Err(Error::InvalidParams(format!(
            "lemma sampling needs at least 1000 samples (got {samples})"
        )));
    }
    Ok(normalized_pairs(samples)
        .map(|(t1, t2)| xi_magnitude(t1, t2, p) / t1.abs().max(t2.abs()))
        .fold(f64::INFINITY, f64::min))
}

/// Empirical constant `c_o` of `|ξ| >= c_o max(|t1|, |t2|)`, for `p > 2`.
pub fn lemma_constant(params: &KernelParams, samples: usize) -> Result<f64> {
    if params.p <= 2.0 {
        return Err(Error::UnsupportedExponent(params.p));
    }
    lemma_ratio_infimum(params.p, samples)
}

/// Minimum ratio over an explicit pair list.
pub fn lemma_constant_over(pairs: &[(f64, f64)], p: f64) -> Result<f64> {
    if p <= 2.0 {
        return Err(Error::UnsupportedExponent(p));
    }
    let mut best = f64::INFINITY;
    for &(t1, t2) in pairs {
        let xi = match mean_value_xi(t1, t2, p)? {
            MeanValue::Magnitude(x) => x,
            MeanValue::Any => unreachable!(),
        };
        best = best.min(xi / t1.abs().max(t2.abs()));
    }
    Ok(best)
}
