//! Flux, adsorption isotherm and the equilibrium change of variables.
//!
//! Both states live in `[0, 1]`. The flux is nondecreasing with `f(0) = 0`,
//! the isotherm is increasing with `A(0) = 0` and `A(1) = 1`. Every shipped
//! kind satisfies these by construction; [`FluxSpec::validate`] and
//! [`IsothermSpec::validate`] reject parameters that would break them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Inputs within this distance outside their interval are clamped.
pub const DOMAIN_SLACK: f64 = 1e-12;

pub(crate) fn check_interval(what: &'static str, x: f64, lo: f64, hi: f64) -> Result<f64> {
    if x.is_nan() || x < lo - DOMAIN_SLACK || x > hi + DOMAIN_SLACK {
        return Err(Error::Domain {
            what,
            value: x,
            lo,
            hi,
        });
    }
    Ok(x.clamp(lo, hi))
}

pub(crate) fn check_unit(what: &'static str, x: f64) -> Result<f64> {
    check_interval(what, x, 0.0, 1.0)
}

/// Monotone flux `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FluxSpec {
    /// `f(u) = c u`
    Linear { c: f64 },
    /// `f(u) = u^2 / 2`
    Quadratic,
}

impl Default for FluxSpec {
    fn default() -> Self {
        FluxSpec::Linear { c: 1.0 }
    }
}

impl FluxSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FluxSpec::Linear { c } if !(c.is_finite() && c > 0.0) => Err(
                Error::InvalidParameter(format!("linear flux speed must be positive, got {c}")),
            ),
            _ => Ok(()),
        }
    }

    /// `f(u)` with domain checking.
    pub fn eval(&self, u: f64) -> Result<f64> {
        Ok(self.value(check_unit("u", u)?))
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            FluxSpec::Linear { c } => c * u,
            FluxSpec::Quadratic => 0.5 * u * u,
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            FluxSpec::Linear { c } => c,
            FluxSpec::Quadratic => u,
        }
    }

    /// Upper bound of `f'` on `[0, 1]`.
    pub fn lip_bound(&self) -> f64 {
        match *self {
            FluxSpec::Linear { c } => c,
            FluxSpec::Quadratic => 1.0,
        }
    }

    /// Entropy flux `q(u) = ∫_0^u ξ f'(ξ) dξ` paired with `u^2 / 2`.
    pub fn entropy_flux(&self, u: f64) -> f64 {
        match *self {
            FluxSpec::Linear { c } => 0.5 * c * u * u,
            FluxSpec::Quadratic => u * u * u / 3.0,
        }
    }

    /// Point of `[0, 1]` where `f'` vanishes, if the flux has one.
    pub(crate) fn sonic_point(&self) -> Option<f64> {
        match self {
            FluxSpec::Linear { .. } => None,
            FluxSpec::Quadratic => Some(0.0),
        }
    }
}

/// Adsorption isotherm `A`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum IsothermSpec {
    /// `A(u) = u`
    #[default]
    Linear,
    /// `A(u) = (1 + β) u / (1 + β u)`, normalized so that `A(1) = 1`.
    Langmuir { beta: f64 },
}

impl IsothermSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            IsothermSpec::Langmuir { beta } if !(beta.is_finite() && beta >= 0.0) => {
                Err(Error::InvalidParameter(format!(
                    "langmuir beta must be finite and nonnegative, got {beta}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        Ok(self.value(check_unit("u", u)?))
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            IsothermSpec::Linear => u,
            IsothermSpec::Langmuir { beta } => (1.0 + beta) * u / (1.0 + beta * u),
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            IsothermSpec::Linear => 1.0,
            IsothermSpec::Langmuir { beta } => {
                let d = 1.0 + beta * u;
                (1.0 + beta) / (d * d)
            }
        }
    }

    /// `(A(x) - A(y)) / (x - y)`, evaluated without cancellation; `A'(x)` when `x == y`.
    #[inline]
    pub fn divided_difference(&self, x: f64, y: f64) -> f64 {
        match *self {
            IsothermSpec::Linear => 1.0,
            IsothermSpec::Langmuir { beta } => {
                (1.0 + beta) / ((1.0 + beta * x) * (1.0 + beta * y))
            }
        }
    }

    /// `sup A'` on `[0, 1]`.
    pub fn lip_bound(&self) -> f64 {
        match *self {
            IsothermSpec::Linear => 1.0,
            IsothermSpec::Langmuir { beta } => 1.0 + beta,
        }
    }

    /// `inf A'` on `[0, 1]`.
    pub fn min_slope(&self) -> f64 {
        match *self {
            IsothermSpec::Linear => 1.0,
            IsothermSpec::Langmuir { beta } => 1.0 / (1.0 + beta),
        }
    }

    /// `A⁻¹(w)` with domain checking.
    pub fn inverse(&self, w: f64) -> Result<f64> {
        Ok(self.inverse_value(check_unit("w", w)?))
    }

    #[inline]
    pub fn inverse_value(&self, w: f64) -> f64 {
        match *self {
            IsothermSpec::Linear => w,
            IsothermSpec::Langmuir { beta } => w / ((1.0 + beta) - beta * w),
        }
    }

    /// `H(v) = ∫_0^v A⁻¹(ξ) dξ`, the convex potential of the adsorbed phase.
    pub fn primitive_of_inverse(&self, v: f64) -> f64 {
        match *self {
            IsothermSpec::Linear => 0.5 * v * v,
            IsothermSpec::Langmuir { beta } => {
                let a = 1.0 + beta;
                let x = beta * v / a;
                if x < 0.1 {
                    // Σ_{k≥2} β^{k-2} v^k / (k a^{k-1}) = (v^2 / a) Σ_{j≥0} x^j / (j + 2)
                    let mut sum = 0.0;
                    let mut xj = 1.0;
                    for j in 0..40 {
                        let term = xj / (j as f64 + 2.0);
                        sum += term;
                        if term < 1e-18 * sum {
                            break;
                        }
                        xj *= x;
                    }
                    v * v / a * sum
                } else {
                    -v / beta - a / (beta * beta) * (-x).ln_1p()
                }
            }
        }
    }
}

/// The special entropy pair `η(u, v) = u²/2 + H(v)` and its flux `q(u)`.
pub fn entropy_pair(flux: &FluxSpec, iso: &IsothermSpec, u: f64, v: f64) -> Result<(f64, f64)> {
    let u = check_unit("u", u)?;
    let v = check_unit("v", v)?;
    Ok((0.5 * u * u + iso.primitive_of_inverse(v), flux.entropy_flux(u)))
}

/// `z = w + A(w)`, a strictly increasing bijection of `[0, 1]` onto `[0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumMap {
    pub isotherm: IsothermSpec,
}

impl EquilibriumMap {
    pub fn new(isotherm: IsothermSpec) -> Self {
        Self { isotherm }
    }

    #[inline]
    pub fn forward(&self, w: f64) -> f64 {
        w + self.isotherm.value(w)
    }

    /// `W(z)`: the `w` with `w + A(w) = z`, by bisection.
    pub fn invert(&self, z: f64) -> Result<f64> {
        let z = check_interval("z", z, 0.0, 2.0)?;
        self.invert_within(z, 0.0, 1.0)
    }

    /// Bisection restricted to a known bracket `[lo, hi]` of the root.
    pub(crate) fn invert_within(&self, z: f64, lo: f64, hi: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        if z >= 2.0 {
            return Ok(1.0);
        }
        bisect(|w| self.forward(w) - z, lo, hi)
    }
}
