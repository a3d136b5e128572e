//! Discrete entropy residuals, the special-entropy budget, relaxation-mass
//! sweeps, reference errors and convergence-rate fits.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, GridState};
use crate::model::FluxSpec;
use crate::numeric::ls_slope;
use crate::sources::{EventReport, Ordering, Strength};
use crate::splitting::{self, Model, RunLog, SchemeConfig};
use crate::transport::{godunov_flux, interface_states};

/// Kružkov constants `(k, l)` for `u` and `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyProbe {
    pub k: f64,
    pub l: f64,
}

/// Largest per-cell residual of the cell entropy inequality for one
/// Godunov step from `before` to `after` of length `step`:
///
/// `|u'_j - k| - |u_j - k| + λ (G_{j+1/2} - G_{j-1/2}) ≤ 0`,
/// with `G(a, b) = g(a ∨ k, b ∨ k) - g(a ∧ k, b ∧ k)`.
pub fn kruzkov_residual_step(
    flux: &FluxSpec,
    grid: &GridSpec,
    before: &[f64],
    after: &[f64],
    k: f64,
    step: f64,
) -> f64 {
    let g: Vec<f64> = interface_states(grid, before)
        .into_iter()
        .map(|(a, b)| godunov_flux(flux, a.max(k), b.max(k)) - godunov_flux(flux, a.min(k), b.min(k)))
        .collect();
    let lambda = step / grid.dx();
    before
        .iter()
        .zip(after)
        .zip(g.windows(2))
        .map(|((&u0, &u1), w)| (u1 - k).abs() - (u0 - k).abs() + lambda * (w[1] - w[0]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Residual of a single convection step between two states.
pub fn kruzkov_residual_convect(
    before: &GridState,
    after: &GridState,
    flux: &FluxSpec,
    grid: &GridSpec,
    k: f64,
    step: f64,
) -> Result<f64> {
    grid.check_len(&before.u)?;
    grid.check_len(&after.u)?;
    Ok(kruzkov_residual_step(flux, grid, &before.u, &after.u, k, step))
}

/// Projection gain per cell: `(1 - e^{-νΔt}) (|Pw - k| - |w - k|)`.
fn projection_gain(grid: &GridSpec, w: &[f64], k: f64, nu: Strength, dt: f64) -> Vec<f64> {
    let weight = nu.rate(dt).map_or(1.0, |r| -(-r).exp_m1());
    let p = grid.project(w).expect("length checked by caller");
    w.iter()
        .zip(&p)
        .map(|(&x, &px)| weight * ((px - k).abs() - (x - k).abs()))
        .collect()
}

/// Relaxation entropy term per cell,
/// `μΔt ∫_0^1 (A(ū) - v̄)(sgn(v̄ - l) - sgn(ū - k)) dτ`.
///
/// Along the layer `dv̄ = μΔt (A(ū) - v̄) dτ` and `ū = s - v̄`, so the
/// integral splits at `v̄ = l` and `v̄ = s - k` into pieces of constant sign
/// and evaluates to `(|v1 - l| - |v0 - l|) + (|s - v1 - k| - |u0 - k|)`.
fn relaxation_term(u0: f64, v0: f64, v1: f64, p: &EntropyProbe) -> f64 {
    let s = u0 + v0;
    ((v1 - p.l).abs() - (v0 - p.l).abs()) + ((s - v1 - p.k).abs() - (u0 - p.k).abs())
}

/// Largest per-cell residual of the event entropy inequality
/// `|u⁺ - k| + |v⁺ - l| - |u⁻ - k| - |v⁻ - l| ≤ projection gain + relaxation term`.
pub fn kruzkov_residual_event(
    before: &GridState,
    after: &GridState,
    report: &EventReport,
    probe: &EntropyProbe,
    cfg: &SchemeConfig,
    grid: &GridSpec,
) -> f64 {
    let mid = &report.mid;
    let (proj_in, relax_in, relax_out) = match cfg.ordering {
        Ordering::Classical => (before, mid, after),
        Ordering::Modified => (mid, before, mid),
    };
    let gu = projection_gain(grid, &proj_in.u, probe.k, cfg.nu, cfg.dt);
    let gv = projection_gain(grid, &proj_in.v, probe.l, cfg.nu, cfg.dt);
    (0..before.u.len())
        .map(|j| {
            let lhs = (after.u[j] - probe.k).abs() + (after.v[j] - probe.l).abs()
                - (before.u[j] - probe.k).abs()
                - (before.v[j] - probe.l).abs();
            let relax = relaxation_term(relax_in.u[j], relax_in.v[j], relax_out.v[j], probe);
            lhs - gu[j] - gv[j] - relax
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Slack of the special-entropy budget over a run:
/// `η(initial) - η(final) - (1 / Lip A) Σ μΔt ∫ (A(ū) - v̄)² dτ dx`.
/// A negative value is a violation.
pub fn special_entropy_balance(log: &RunLog, model: &Model) -> Result<f64> {
    let (Some(first), Some(last)) = (log.initial(), log.last()) else {
        return Err(Error::InvalidParameter("empty run log".into()));
    };
    Ok(first.eta - last.eta - last.relax_quadratic_cum / model.isotherm.lip_bound())
}

/// Relaxation totals of one run in a `μ` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub mu: f64,
    /// `Σ_n μΔt Σ_j ∫ |A(ū) - v̄| dτ dx`.
    pub relax_mass: f64,
    /// `Σ_n μΔt Σ_j ∫ (A(ū) - v̄)² dτ dx`.
    pub relax_quadratic: f64,
    /// `η(initial) - η(final)`.
    pub entropy_drop: f64,
}

/// Runs the scheme for each `μ` in parallel; results are in input order.
pub fn relax_mass_sweep(
    state0: &GridState,
    model: &Model,
    grid: &GridSpec,
    base: &SchemeConfig,
    mus: &[f64],
) -> Result<Vec<SweepPoint>> {
    mus.par_iter()
        .map(|&mu| {
            let cfg = SchemeConfig {
                mu: Strength::Finite(mu),
                ..base.clone()
            };
            let (_, log) = splitting::run_with_probes(state0, model, grid, &cfg, &[])
                .map_err(|e| e.context(format!("mu = {mu}")))?;
            let first = log.initial().expect("run log has an initial row");
            let last = log.last().expect("run log has a final row");
            Ok(SweepPoint {
                mu,
                relax_mass: last.relax_mass_cum,
                relax_quadratic: last.relax_quadratic_cum,
                entropy_drop: first.eta - last.eta,
            })
        })
        .collect()
}

/// `L¹` distance between `field` on `grid` and a reference on a finer (or
/// equal) grid, after averaging the reference onto `grid`'s cells.
pub fn error_vs_reference(
    field: &[f64],
    grid: &GridSpec,
    reference: &[f64],
    ref_grid: &GridSpec,
) -> Result<f64> {
    grid.check_len(field)?;
    ref_grid.check_len(reference)?;
    let (n, nr) = (grid.n_fine(), ref_grid.n_fine());
    if nr % n != 0
        || (grid.x_min - ref_grid.x_min).abs() > 1e-12
        || (grid.x_max - ref_grid.x_max).abs() > 1e-12
    {
        return Err(Error::GridMismatch);
    }
    let r = nr / n;
    let avg: Vec<f64> = reference
        .chunks(r)
        .map(|c| c.iter().sum::<f64>() / r as f64)
        .collect();
    Ok(grid.l1_distance(field, &avg))
}

/// Least-squares slope of `log(error)` against `log(param)`.
pub fn fit_rate(params: &[f64], errors: &[f64]) -> Result<f64> {
    if params.len() != errors.len() || params.len() < 2 {
        return Err(Error::InvalidParameter(
            "rate fit needs at least two (param, error) pairs".into(),
        ));
    }
    if params.iter().chain(errors).any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter(
            "rate fit needs positive finite params and errors".into(),
        ));
    }
    let lx: Vec<f64> = params.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|x| x.ln()).collect();
    Ok(ls_slope(&lx, &ly))
}

/// Time modulus of a run against its a-priori bound
/// `(T + Δt)(h/Δt + Lip f)(TV u0 + TV v0) + 2 · relax_mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equicontinuity {
    pub modulus: f64,
    pub bound: f64,
}

pub fn equicontinuity(log: &RunLog, model: &Model, grid: &GridSpec, cfg: &SchemeConfig) -> Result<Equicontinuity> {
    let (Some(first), Some(last)) = (log.initial(), log.last()) else {
        return Err(Error::InvalidParameter("empty run log".into()));
    };
    let tv0 = first.tv_u + first.tv_v;
    let bound = (cfg.horizon + cfg.dt) * (grid.h() / cfg.dt + model.flux.lip_bound()) * tv0
        + 2.0 * last.relax_mass_cum;
    Ok(Equicontinuity {
        modulus: log.time_modulus,
        bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Named checks, serialised as `{name: {max_violation, tolerance, pass}}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiagnosticsSummary {
    pub checks: BTreeMap<String, CheckResult>,
}

impl DiagnosticsSummary {
    /// Records a check that passes when `violation ≤ tolerance`.
    pub fn add(&mut self, name: impl Into<String>, violation: f64, tolerance: f64) -> bool {
        self.record(name, violation, tolerance, violation <= tolerance)
    }

    /// Records a check with an explicit verdict.
    pub fn record(&mut self, name: impl Into<String>, violation: f64, tolerance: f64, pass: bool) -> bool {
        self.checks.insert(
            name.into(),
            CheckResult {
                max_violation: violation,
                tolerance,
                pass,
            },
        );
        pass
    }

    /// Passes when `value > min`; the violation is `min - value`.
    pub fn require_above(&mut self, name: impl Into<String>, value: f64, min: f64) -> bool {
        self.record(name, min - value, 0.0, value > min)
    }

    /// Passes when `value ≥ min`; the violation is `min - value`.
    pub fn require_at_least(&mut self, name: impl Into<String>, value: f64, min: f64) -> bool {
        self.record(name, min - value, 0.0, value >= min)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    pub fn extend(&mut self, prefix: &str, other: DiagnosticsSummary) {
        for (k, v) in other.checks {
            self.checks.insert(format!("{prefix}{k}"), v);
        }
    }
}

/// Standard checks for a single run: entropy residuals, special-entropy
/// budget and the equicontinuity bound.
pub fn summarize_run(log: &RunLog, model: &Model, grid: &GridSpec, cfg: &SchemeConfig) -> Result<DiagnosticsSummary> {
    let mut s = DiagnosticsSummary::default();
    let conv = log.max_convect_residual();
    s.add("kruzkov_convect", if conv.is_finite() { conv } else { 0.0 }, 1e-12);
    let ev = log.max_event_residual();
    s.add("kruzkov_event", if ev.is_finite() { ev } else { 0.0 }, 1e-10);
    s.add("special_entropy", -special_entropy_balance(log, model)?, 1e-10);
    let eq = equicontinuity(log, model, grid, cfg)?;
    s.add("equicontinuity", eq.modulus - eq.bound, 0.0);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IsothermSpec;
    use crate::sources::apply_event;
    use crate::transport::godunov_step;

    #[test]
    fn constant_state_has_zero_convect_residual() {
        let g = GridSpec::unit(8, 2);
        let u = vec![0.3; 16];
        for k in [0.0, 0.3, 0.7] {
            let r = kruzkov_residual_step(&FluxSpec::Quadratic, &g, &u, &u, k, 0.01);
            assert!(r.abs() < 1e-15);
        }
    }

    #[test]
    fn convect_residual_detects_tampering() {
        let g = GridSpec::unit(10, 1);
        let u: Vec<f64> = (0..10).map(|i| if i < 5 { 0.8 } else { 0.2 }).collect();
        let step = 0.9 * g.dx();
        let mut after = godunov_step(&FluxSpec::Quadratic, &g, &u, step);
        let r = kruzkov_residual_step(&FluxSpec::Quadratic, &g, &u, &after, 0.5, step);
        assert!(r <= 1e-12);
        after[5] += 0.05;
        let r = kruzkov_residual_step(&FluxSpec::Quadratic, &g, &u, &after, 0.0, step);
        assert!(r > 1e-3);
    }

    #[test]
    fn event_residual_small_for_both_orderings() {
        let g = GridSpec::unit(6, 4);
        let s = GridState::from_functions(&g, |x| (6.0 * x).sin().abs(), |x| 0.5 * (3.0 * x).cos().abs())
            .unwrap();
        let s = GridState { t: 0.05, ..s };
        for ordering in [Ordering::Classical, Ordering::Modified] {
            for nu in [Strength::Infinite, Strength::Finite(30.0)] {
                let cfg = SchemeConfig {
                    ordering,
                    nu,
                    dt: 0.05,
                    horizon: 0.05,
                    mu: Strength::Finite(8.0),
                    ..Default::default()
                };
                let (after, rep) = apply_event(&s, &IsothermSpec::Langmuir { beta: 1.5 }, &g, &cfg).unwrap();
                for k in [0.1, 0.4, 0.9] {
                    for l in [0.0, 0.3, 0.6] {
                        let r = kruzkov_residual_event(&s, &after, &rep, &EntropyProbe { k, l }, &cfg, &g);
                        assert!(r <= 1e-12, "{ordering:?} {nu:?} k={k} l={l}: {r}");
                    }
                }
                let mut bad = after.clone();
                bad.u[3] += 0.1;
                let r = kruzkov_residual_event(&s, &bad, &rep, &EntropyProbe { k: 0.0, l: 0.0 }, &cfg, &g);
                assert!(r > 0.05);
            }
        }
    }

    #[test]
    fn reference_error_and_fit() {
        let coarse = GridSpec::unit(4, 1);
        let fine = GridSpec::unit(8, 1);
        let reference: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
        let field: Vec<f64> = (0..4).map(|i| (2 * i) as f64 / 8.0 + 1.0 / 16.0).collect();
        assert!(error_vs_reference(&field, &coarse, &reference, &fine).unwrap() < 1e-15);
        assert!(error_vs_reference(&reference, &fine, &field, &coarse).is_err());

        let params = [0.1, 0.05, 0.025];
        let errors: Vec<f64> = params.iter().map(|p: &f64| 3.0 * p.powf(0.5)).collect();
        assert!((fit_rate(&params, &errors).unwrap() - 0.5).abs() < 1e-12);
        assert!(fit_rate(&[1.0], &[1.0]).is_err());
        assert!(fit_rate(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn summary_serialises_as_named_checks() {
        let mut s = DiagnosticsSummary::default();
        assert!(s.add("a", 1e-13, 1e-12));
        assert!(!s.add("b", 2.0, 1.0));
        assert!(!s.all_pass());
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["a"]["pass"], true);
        assert_eq!(v["b"]["tolerance"], 1.0);
    }
}
