//! Event operators fired at `t = nΔt`: the inner projection layer, the
//! inner relaxation layer and the two orderings that compose them.
//!
//! The relaxation layer conserves `s = u + v` pointwise, so it reduces to
//! the scalar problem `dv/dτ = rate · (A(s - v) - v)` on `τ ∈ [0, 1]` with
//! `rate = μΔt`. Its right-hand side `g(v) = A(s - v) - v` is strictly
//! decreasing with a single root `v*`, hence the layer is monotone and
//! never crosses `v*`.
//!
//! For a nonlinear isotherm the layer is obtained by inverting the exact
//! time map `τ(v) = ∫_{v0}^{v} dw / (rate · g(w))`. The integrand has a
//! simple pole at `v*`; writing `v = v* - σ e^θ` and `g(v) = (v* - v) K(v)`
//! with `K(v) = 1 + (A(s - v) - A(s - v*)) / (v* - v)` turns it into
//! `τ(θ) = (1 / rate) ∫_θ^{θ0} dθ' / K`, whose integrand is smooth and
//! bounded in `[1 / (1 + Lip A), 1 / (1 + inf A')]`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, GridState};
use crate::model::{check_interval, check_unit, IsothermSpec};
use crate::numeric::{adaptive_simpson, bisect, gauss_legendre};
use crate::splitting::SchemeConfig;

/// Strength of the projection (`ν`) or relaxation (`μ`) process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strength {
    Finite(f64),
    Infinite,
}

impl Strength {
    pub fn validate(&self, what: &str) -> Result<()> {
        match *self {
            Strength::Finite(x) if !(x.is_finite() && x >= 0.0) => Err(Error::InvalidParameter(
                format!("{what} must be a nonnegative number or \"infinite\", got {x}"),
            )),
            _ => Ok(()),
        }
    }

    /// `strength · dt`, or `None` when infinite.
    pub fn rate(&self, dt: f64) -> Option<f64> {
        match *self {
            Strength::Finite(x) => Some(x * dt),
            Strength::Infinite => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Strength::Infinite)
    }
}

impl Serialize for Strength {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Strength::Finite(x) => s.serialize_f64(x),
            Strength::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Strength {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Strength::Finite(x)),
            Raw::Text(t) if t == "infinite" => Ok(Strength::Infinite),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"infinite\", got \"{t}\""
            ))),
        }
    }
}

/// Order of the two processes inside an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    /// Project, then relax from the projected (piecewise constant) state.
    #[default]
    Classical,
    /// Relax from the incoming state, then project.
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelaxSolver {
    #[default]
    ExactQuadrature,
    BackwardEuler,
}

/// Pointwise relaxation problem on the layer variable `τ ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOdeProblem {
    pub u0: f64,
    pub v0: f64,
    /// `μΔt`
    pub rate: f64,
}

impl InnerOdeProblem {
    pub fn new(u0: f64, v0: f64, rate: f64) -> Self {
        Self { u0, v0, rate }
    }

    /// Conserved sum `u + v`.
    pub fn s(&self) -> f64 {
        self.u0 + self.v0
    }
}

/// Root `v*` of `A(s - v) = v` in `[max(0, s - 1), min(1, s)]`.
pub fn relax_equilibrium_root(iso: &IsothermSpec, s: f64) -> Result<f64> {
    let s = check_interval("s", s, 0.0, 2.0)?;
    Ok(equilibrium_root(iso, s))
}

fn equilibrium_root(iso: &IsothermSpec, s: f64) -> f64 {
    match iso {
        IsothermSpec::Linear => 0.5 * s,
        _ => {
            let lo = (s - 1.0).max(0.0);
            let hi = s.min(1.0);
            // g(lo) ≥ 0 ≥ g(hi) by the endpoint values of A
            bisect(|v| iso.value(s - v) - v, lo, hi).unwrap_or(0.5 * (lo + hi))
        }
    }
}

/// Exact relaxation layer through `(u0, v0)`.
#[derive(Debug, Clone, Copy)]
pub struct RelaxLayer {
    iso: IsothermSpec,
    s: f64,
    v0: f64,
    vstar: f64,
    rate: f64,
}

impl RelaxLayer {
    pub fn new(iso: &IsothermSpec, prob: &InnerOdeProblem) -> Result<Self> {
        let u0 = check_unit("u0", prob.u0)?;
        let v0 = check_unit("v0", prob.v0)?;
        if !(prob.rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation rate must be nonnegative, got {}",
                prob.rate
            )));
        }
        let s = u0 + v0;
        Ok(Self {
            iso: *iso,
            s,
            v0,
            vstar: equilibrium_root(iso, s),
            rate: prob.rate,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn vstar(&self) -> f64 {
        self.vstar
    }

    /// `g(w) = A(s - w) - w`, factored through `v*` to stay accurate near the root.
    pub fn rhs(&self, w: f64) -> f64 {
        (self.vstar - w) * self.k_factor(w)
    }

    #[inline]
    fn k_factor(&self, w: f64) -> f64 {
        1.0 + self
            .iso
            .divided_difference(self.s - w, self.s - self.vstar)
    }

    fn sigma(&self) -> f64 {
        (self.vstar - self.v0).signum()
    }

    fn v_of_theta(&self, theta: f64) -> f64 {
        self.vstar - self.sigma() * theta.exp()
    }

    /// `∫_{lo}^{hi} dθ / K(v(θ))`
    fn theta_integral(&self, lo: f64, hi: f64) -> f64 {
        let tol = 1e-15 * (hi - lo).abs().max(1.0);
        adaptive_simpson(|th| 1.0 / self.k_factor(self.v_of_theta(th)), lo, hi, tol)
    }

    /// Layer time at which `v̄` reaches `v` (infinite at `v*`).
    pub fn tau_at(&self, v: f64) -> f64 {
        let d0 = (self.vstar - self.v0).abs();
        let d = (self.vstar - v).abs();
        if d0 == 0.0 || v == self.v0 {
            return 0.0;
        }
        if d == 0.0 || self.rate == 0.0 {
            return f64::INFINITY;
        }
        if let IsothermSpec::Linear = self.iso {
            return (d0 / d).ln() / (2.0 * self.rate);
        }
        self.theta_integral(d.ln(), d0.ln()) / self.rate
    }

    /// `v̄(τ)`.
    pub fn v_at(&self, tau: f64) -> f64 {
        let d0 = self.vstar - self.v0;
        if d0 == 0.0 || self.rate == 0.0 || tau <= 0.0 {
            return self.v0;
        }
        let target = self.rate * tau;
        if let IsothermSpec::Linear = self.iso {
            return self.vstar - d0 * (-2.0 * target).exp();
        }
        let theta0 = d0.abs().ln();
        let k_lo = 1.0 + self.iso.min_slope();
        let k_hi = 1.0 + self.iso.lip_bound();
        let mut lo = theta0 - target * k_hi;
        let mut hi = theta0 - target * k_lo;
        if hi < (1e-300f64).ln() {
            return self.vstar;
        }
        lo = lo.max((1e-310f64).ln());
        // Newton on φ(θ) = ∫_θ^{θ0} dθ'/K - target, safeguarded by the bracket.
        // The integral is accumulated incrementally from the previous iterate.
        let mut theta = theta0 - target * self.k_factor(self.vstar);
        theta = theta.clamp(lo, hi);
        let mut integral = self.theta_integral(theta, theta0);
        for _ in 0..100 {
            let phi = integral - target;
            if phi.abs() <= 1e-15 * target.max(1.0) {
                break;
            }
            if phi > 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
            let k = self.k_factor(self.v_of_theta(theta));
            let mut next = theta + phi * k;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == theta {
                break;
            }
            integral -= self.theta_integral(theta, next);
            theta = next;
            if hi - lo <= 1e-15 * theta.abs().max(1.0) {
                break;
            }
        }
        self.v_of_theta(theta)
    }

    /// `rate ∫_0^1 g(v̄)² dτ`, equal to `∫_{v0}^{v1} g(w) dw` along the layer.
    pub fn quadratic_mass(&self, v1: f64) -> f64 {
        gauss_legendre(|w| self.rhs(w), self.v0, v1, 4)
    }
}

/// Solves one pointwise relaxation layer to `τ = 1`.
///
/// `mu = Infinite` jumps straight to the equilibrium root; otherwise
/// `prob.rate` (= μΔt) drives the layer. A zero rate is the identity.
pub fn relax_inner_solve(
    iso: &IsothermSpec,
    prob: &InnerOdeProblem,
    mu: Strength,
) -> Result<(f64, f64)> {
    relax_with(iso, prob, mu, RelaxSolver::ExactQuadrature).map(|r| (r.u1, r.v1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RelaxOutcome {
    pub u1: f64,
    pub v1: f64,
    pub quadratic: f64,
}

pub(crate) fn relax_with(
    iso: &IsothermSpec,
    prob: &InnerOdeProblem,
    mu: Strength,
    solver: RelaxSolver,
) -> Result<RelaxOutcome> {
    if let Strength::Finite(_) = mu {
        if !(prob.rate >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "relaxation rate must be nonnegative, got {}",
                prob.rate
            )));
        }
    }
    let layer = RelaxLayer::new(
        iso,
        &InnerOdeProblem {
            rate: prob.rate.max(0.0),
            ..*prob
        },
    )?;
    let s = layer.s;
    let v0 = layer.v0;
    let (v1, quadratic) = match (mu, solver) {
        (Strength::Infinite, _) => (layer.vstar, layer.quadratic_mass(layer.vstar)),
        (Strength::Finite(_), _) if prob.rate == 0.0 => (v0, 0.0),
        (Strength::Finite(_), RelaxSolver::ExactQuadrature) => {
            let v1 = layer.v_at(1.0);
            (v1, layer.quadratic_mass(v1))
        }
        (Strength::Finite(_), RelaxSolver::BackwardEuler) => {
            let (a, b) = (v0.min(layer.vstar), v0.max(layer.vstar));
            let v1 = if a == b {
                v0
            } else {
                bisect(|v| v - v0 - prob.rate * layer.rhs(v), a, b)?
            };
            (v1, (v1 - v0) * (v1 - v0) / prob.rate)
        }
    };
    Ok(RelaxOutcome {
        u1: if v1 == v0 { prob.u0.clamp(0.0, 1.0) } else { s - v1 },
        v1,
        quadratic,
    })
}

/// Explicit solution of the projection layer at `τ = 1`:
/// `e^{-νΔt} w + (1 - e^{-νΔt}) P w`, or `P w` for infinite `ν`.
pub fn project_inner_apply(grid: &GridSpec, field: &[f64], nu: Strength, dt: f64) -> Result<Vec<f64>> {
    let projected = grid.project(field)?;
    let keep = match nu.rate(dt) {
        None => return Ok(projected),
        Some(r) => (-r).exp(),
    };
    Ok(field
        .iter()
        .zip(&projected)
        .map(|(w, p)| keep * w + (1.0 - keep) * p)
        .collect())
}

/// What happened inside one event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventReport {
    /// `μΔt Σ ∫_0^1 |A(ū) - v̄| dτ · dx`, i.e. `Σ |v1 - v0| dx`.
    pub relax_mass: f64,
    /// `μΔt Σ ∫_0^1 (A(ū) - v̄)² dτ · dx`.
    pub relax_quadratic: f64,
    /// State between the two sub-operations: projected (classical) or
    /// relaxed (modified).
    pub mid: GridState,
}

fn relax_fields(
    iso: &IsothermSpec,
    grid: &GridSpec,
    state: &GridState,
    cfg: &SchemeConfig,
) -> Result<(GridState, f64, f64)> {
    let rate = cfg.mu.rate(cfg.dt).unwrap_or(0.0);
    let mut u = Vec::with_capacity(state.u.len());
    let mut v = Vec::with_capacity(state.v.len());
    let (mut mass, mut quad) = (0.0, 0.0);
    for (&u0, &v0) in state.u.iter().zip(&state.v) {
        let out = relax_with(iso, &InnerOdeProblem::new(u0, v0, rate), cfg.mu, cfg.relax_solver)?;
        mass += (out.v1 - v0).abs();
        quad += out.quadratic;
        u.push(out.u1);
        v.push(out.v1);
    }
    let dx = grid.dx();
    Ok((GridState { u, v, t: state.t }, mass * dx, quad * dx))
}

fn project_fields(grid: &GridSpec, state: &GridState, cfg: &SchemeConfig) -> Result<GridState> {
    Ok(GridState {
        u: project_inner_apply(grid, &state.u, cfg.nu, cfg.dt)?,
        v: project_inner_apply(grid, &state.v, cfg.nu, cfg.dt)?,
        t: state.t,
    })
}

/// Fires the event at `t = nΔt`, `n ≥ 1`, in the configured ordering.
pub fn apply_event(
    state: &GridState,
    iso: &IsothermSpec,
    grid: &GridSpec,
    cfg: &SchemeConfig,
) -> Result<(GridState, EventReport)> {
    let n = (state.t / cfg.dt).round();
    if n < 1.0 || (state.t - n * cfg.dt).abs() > 1e-12 * cfg.dt * n.max(1.0) {
        return Err(Error::OffSchedule {
            t: state.t,
            dt: cfg.dt,
        });
    }
    let (after, mid, relax_mass, relax_quadratic) = match cfg.ordering {
        Ordering::Classical => {
            let mid = project_fields(grid, state, cfg)?;
            let (after, mass, quad) = relax_fields(iso, grid, &mid, cfg)?;
            (after, mid, mass, quad)
        }
        Ordering::Modified => {
            let (mid, mass, quad) = relax_fields(iso, grid, state, cfg)?;
            let after = project_fields(grid, &mid, cfg)?;
            (after, mid, mass, quad)
        }
    };
    Ok((
        after,
        EventReport {
            relax_mass,
            relax_quadratic,
            mid,
        },
    ))
}
