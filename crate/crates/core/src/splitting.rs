//! Time-stepping drivers: convection over each `[(n-1)Δt, nΔt)` followed
//! by an event at `nΔt`, the lockstep pair runner used for contraction
//! checks, and the ε-ramp (mollified) integrator that the split scheme is
//! the `ε → 0` limit of.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, EntropyProbe};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, GridState};
use crate::model::{FluxSpec, IsothermSpec};
use crate::output::fmt17;
use crate::sources::{self, Ordering, RelaxSolver, Strength};
use crate::transport::{self, CflPolicy};

/// Flux and isotherm of the relaxation system.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    #[serde(default)]
    pub flux: FluxSpec,
    #[serde(default)]
    pub isotherm: IsothermSpec,
}

impl Model {
    pub fn new(flux: FluxSpec, isotherm: IsothermSpec) -> Self {
        Self { flux, isotherm }
    }

    pub fn validate(&self) -> Result<()> {
        self.flux.validate()?;
        self.isotherm.validate()
    }

    /// `∫ η(u, v) dx` with `η = u²/2 + H(v)`.
    pub fn total_entropy(&self, grid: &GridSpec, state: &GridState) -> f64 {
        state
            .u
            .iter()
            .zip(&state.v)
            .map(|(&u, &v)| 0.5 * u * u + self.isotherm.primitive_of_inverse(v.clamp(0.0, 1.0)))
            .sum::<f64>()
            * grid.dx()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default)]
    pub ordering: Ordering,
    #[serde(default = "SchemeConfig::default_mu")]
    pub mu: Strength,
    #[serde(default = "SchemeConfig::default_nu")]
    pub nu: Strength,
    /// Event spacing `Δt`.
    #[serde(default = "SchemeConfig::default_dt")]
    pub dt: f64,
    /// Final time `T`, a whole number of `Δt`.
    #[serde(default = "SchemeConfig::default_horizon")]
    pub horizon: f64,
    #[serde(default, rename = "courant")]
    pub cfl: CflPolicy,
    #[serde(default)]
    pub relax_solver: RelaxSolver,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            ordering: Ordering::Classical,
            mu: Self::default_mu(),
            nu: Self::default_nu(),
            dt: Self::default_dt(),
            horizon: Self::default_horizon(),
            cfl: CflPolicy::default(),
            relax_solver: RelaxSolver::ExactQuadrature,
        }
    }
}

impl SchemeConfig {
    fn default_mu() -> Strength {
        Strength::Finite(10.0)
    }
    fn default_nu() -> Strength {
        Strength::Infinite
    }
    fn default_dt() -> f64 {
        0.01
    }
    fn default_horizon() -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        self.mu.validate("mu")?;
        self.nu.validate("nu")?;
        self.cfl.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::config("scheme.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::config(
                "scheme.horizon",
                format!("horizon {} must be at least dt {}", self.horizon, self.dt),
            ));
        }
        let k = self.horizon / self.dt;
        if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::config(
                "scheme.horizon",
                format!(
                    "horizon {} is not a whole multiple of dt {}",
                    self.horizon, self.dt
                ),
            ));
        }
        Ok(())
    }

    /// Number of events in `(0, T]`.
    pub fn n_events(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initial,
    Convect,
    PreEvent,
    PostEvent,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Initial => "initial",
            Phase::Convect => "convect",
            Phase::PreEvent => "pre_event",
            Phase::PostEvent => "post_event",
        }
    }
}

/// One row of the run log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    /// Index `n` of the interval `[(n-1)Δt, nΔt]`; 0 for the initial row.
    pub step: usize,
    pub t: f64,
    pub phase: Phase,
    pub l1_u: f64,
    pub l1_v: f64,
    pub tv_u: f64,
    pub tv_v: f64,
    pub mass_u_plus_v: f64,
    pub relax_mass_cum: f64,
    /// Largest discrete entropy residual of the step that produced this row.
    pub entropy_residual_max: f64,
    pub eta: f64,
    pub relax_quadratic_cum: f64,
}

pub const RUN_LOG_HEADER: &str =
    "step,t,phase,l1_u,l1_v,tv_u,tv_v,mass_u_plus_v,relax_mass_cum,entropy_residual_max";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
    /// `Σ_n l1(S_n - S_{n-1})` over post-event states, `S_0` initial.
    pub time_modulus: f64,
}

impl RunLog {
    pub fn initial(&self) -> Option<&LogRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn events(&self) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(|r| r.phase == Phase::PostEvent)
    }

    pub fn max_convect_residual(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.phase == Phase::Convect)
            .map(|r| r.entropy_residual_max)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_event_residual(&self) -> f64 {
        self.events()
            .map(|r| r.entropy_residual_max)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{RUN_LOG_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.step,
                fmt17(r.t),
                r.phase.as_str(),
                fmt17(r.l1_u),
                fmt17(r.l1_v),
                fmt17(r.tv_u),
                fmt17(r.tv_v),
                fmt17(r.mass_u_plus_v),
                fmt17(r.relax_mass_cum),
                fmt17(r.entropy_residual_max)
            )?;
        }
        Ok(())
    }
}

/// Default Kružkov constants probed during a run.
pub const DEFAULT_PROBES: [f64; 3] = [0.25, 0.5, 0.75];

struct Recorder<'a> {
    model: &'a Model,
    grid: &'a GridSpec,
    log: RunLog,
    relax_mass: f64,
    relax_quadratic: f64,
}

impl Recorder<'_> {
    fn push(&mut self, step: usize, phase: Phase, s: &GridState, residual: f64) {
        let g = self.grid;
        self.log.rows.push(LogRow {
            step,
            t: s.t,
            phase,
            l1_u: g.l1_norm(&s.u),
            l1_v: g.l1_norm(&s.v),
            tv_u: g.total_variation(&s.u),
            tv_v: g.total_variation(&s.v),
            mass_u_plus_v: g.mass(&s.u) + g.mass(&s.v),
            relax_mass_cum: self.relax_mass,
            entropy_residual_max: residual,
            eta: self.model.total_entropy(g, s),
            relax_quadratic_cum: self.relax_quadratic,
        });
    }
}

/// Runs the split scheme to the horizon with the default probes.
pub fn run(
    state0: &GridState,
    model: &Model,
    grid: &GridSpec,
    cfg: &SchemeConfig,
) -> Result<(GridState, RunLog)> {
    run_with_probes(state0, model, grid, cfg, &DEFAULT_PROBES)
}

/// Runs the split scheme, checking discrete entropy inequalities at every
/// convection sub-step (`k ∈ probes`) and every event (`(k, l) ∈ probes²`).
pub fn run_with_probes(
    state0: &GridState,
    model: &Model,
    grid: &GridSpec,
    cfg: &SchemeConfig,
    probes: &[f64],
) -> Result<(GridState, RunLog)> {
    run_observed(state0, model, grid, cfg, probes, &mut |_, _, _| {})
}

/// As [`run_with_probes`], calling `observer(n, phase, state)` on the
/// initial state and on both sides of every event.
pub fn run_observed(
    state0: &GridState,
    model: &Model,
    grid: &GridSpec,
    cfg: &SchemeConfig,
    probes: &[f64],
    observer: &mut dyn FnMut(usize, Phase, &GridState),
) -> Result<(GridState, RunLog)> {
    model.validate()?;
    grid.validate()?;
    cfg.validate()?;
    state0.validate(grid)?;
    let pairs: Vec<EntropyProbe> = probes
        .iter()
        .flat_map(|&k| probes.iter().map(move |&l| EntropyProbe { k, l }))
        .collect();

    let mut rec = Recorder {
        model,
        grid,
        log: RunLog::default(),
        relax_mass: 0.0,
        relax_quadratic: 0.0,
    };
    let mut state = GridState {
        t: 0.0,
        ..state0.clone()
    };
    rec.push(0, Phase::Initial, &state, 0.0);
    observer(0, Phase::Initial, &state);
    let steps = cfg.cfl.substeps(&model.flux, grid, cfg.dt);

    for n in 1..=cfg.n_events() {
        let interval_start = state.clone();
        for &step in &steps {
            cfg.cfl.check_step(&model.flux, grid, step)?;
            let u = transport::godunov_step(&model.flux, grid, &state.u, step);
            let residual = probes
                .iter()
                .map(|&k| diagnostics::kruzkov_residual_step(&model.flux, grid, &state.u, &u, k, step))
                .fold(f64::NEG_INFINITY, f64::max);
            state.u = u;
            state.t += step;
            rec.push(n, Phase::Convect, &state, residual);
        }
        state.t = n as f64 * cfg.dt;
        rec.push(n, Phase::PreEvent, &state, 0.0);
        observer(n, Phase::PreEvent, &state);

        let (after, report) = sources::apply_event(&state, &model.isotherm, grid, cfg)
            .map_err(|e| e.context(format!("event {n}")))?;
        let residual = pairs
            .iter()
            .map(|p| diagnostics::kruzkov_residual_event(&state, &after, &report, p, cfg, grid))
            .fold(f64::NEG_INFINITY, f64::max);
        rec.relax_mass += report.relax_mass;
        rec.relax_quadratic += report.relax_quadratic;
        state = after;
        rec.push(n, Phase::PostEvent, &state, residual);
        observer(n, Phase::PostEvent, &state);
        rec.log.time_modulus += state.l1_distance(&interval_start, grid);
    }
    Ok((state, rec.log))
}

/// Advances two states in lockstep and records `l1(u - ũ) + l1(v - ṽ)`
/// at `t = 0`, after every convection sub-step and after every event.
pub fn run_pair(
    a: &GridState,
    b: &GridState,
    model: &Model,
    grid: &GridSpec,
    cfg: &SchemeConfig,
) -> Result<Vec<(f64, f64)>> {
    model.validate()?;
    cfg.validate()?;
    if a.u.len() != b.u.len() || a.v.len() != b.v.len() {
        return Err(Error::GridMismatch);
    }
    a.validate(grid)?;
    b.validate(grid)?;
    let mut sa = GridState { t: 0.0, ..a.clone() };
    let mut sb = GridState { t: 0.0, ..b.clone() };
    let mut out = vec![(0.0, sa.l1_distance(&sb, grid))];
    let steps = cfg.cfl.substeps(&model.flux, grid, cfg.dt);
    for n in 1..=cfg.n_events() {
        for &step in &steps {
            sa.u = transport::godunov_step(&model.flux, grid, &sa.u, step);
            sb.u = transport::godunov_step(&model.flux, grid, &sb.u, step);
            sa.t += step;
            out.push((sa.t, sa.l1_distance(&sb, grid)));
        }
        sa.t = n as f64 * cfg.dt;
        sb.t = sa.t;
        sa = sources::apply_event(&sa, &model.isotherm, grid, cfg)?.0;
        sb = sources::apply_event(&sb, &model.isotherm, grid, cfg)?.0;
        out.push((sa.t, sa.l1_distance(&sb, grid)));
    }
    Ok(out)
}

/// Ramp parameters of the mollified system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifiedConfig {
    pub epsilon: f64,
    #[serde(default = "MollifiedConfig::default_ramp_substeps")]
    pub ramp_substeps: usize,
}

impl MollifiedConfig {
    fn default_ramp_substeps() -> usize {
        16
    }

    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            ramp_substeps: Self::default_ramp_substeps(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    Convect,
    /// `t ∈ [nΔt - ε, nΔt)`: projection source at rate `νΔt/ε`.
    ProjectRamp,
    /// `t ∈ [nΔt, nΔt + ε)`: relaxation source at rate `μΔt/ε`.
    RelaxRamp,
}

/// Integrates the ε-ramp system up to `T + ε`, where the last relaxation
/// ramp completes.
///
/// Inside the ramps convection and source are Lie-split over
/// `ramp_substeps` (or more, if the CFL bound requires) equal sub-steps.
/// Projection sub-flows are exact; relaxation sub-flows are exact for the
/// linear isotherm and sub-stepped backward Euler otherwise.
pub fn run_mollified(
    state0: &GridState,
    model: &Model,
    grid: &GridSpec,
    cfg: &SchemeConfig,
    moll: &MollifiedConfig,
) -> Result<GridState> {
    model.validate()?;
    cfg.validate()?;
    state0.validate(grid)?;
    let eps = moll.epsilon;
    if !(eps > 0.0 && eps < 0.5 * cfg.dt) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {eps} must lie in (0, dt/2) with dt = {}",
            cfg.dt
        )));
    }
    if moll.ramp_substeps == 0 {
        return Err(Error::InvalidParameter("ramp_substeps must be positive".into()));
    }
    let (Some(nu_rate), Some(mu_rate)) = (cfg.nu.rate(cfg.dt), cfg.mu.rate(cfg.dt)) else {
        return Err(Error::InvalidParameter(
            "the mollified system needs finite mu and nu".into(),
        ));
    };

    // Segment list with pure-convection pieces merged.
    let mut segments: Vec<(f64, f64, Segment)> = Vec::new();
    let mut push = |a: f64, b: f64, kind: Segment| {
        let kind = match kind {
            Segment::ProjectRamp if nu_rate == 0.0 => Segment::Convect,
            Segment::RelaxRamp if mu_rate == 0.0 => Segment::Convect,
            k => k,
        };
        if let Some(last) = segments.last_mut() {
            if last.2 == Segment::Convect && kind == Segment::Convect {
                last.1 = b;
                return;
            }
        }
        segments.push((a, b, kind));
    };
    let mut t = 0.0;
    for n in 1..=cfg.n_events() {
        let tn = n as f64 * cfg.dt;
        push(t, tn - eps, Segment::Convect);
        push(tn - eps, tn, Segment::ProjectRamp);
        push(tn, tn + eps, Segment::RelaxRamp);
        t = tn + eps;
    }

    let mut state = GridState { t: 0.0, ..state0.clone() };
    let max_step = cfg.cfl.max_step(&model.flux, grid);
    for (a, b, kind) in segments {
        let len = b - a;
        match kind {
            Segment::Convect => {
                state = transport::convect(&state, &model.flux, grid, len, &cfg.cfl)?;
            }
            Segment::ProjectRamp | Segment::RelaxRamp => {
                let nsub = moll.ramp_substeps.max((len / max_step).ceil() as usize);
                let delta = len / nsub as f64;
                for _ in 0..nsub {
                    state.u = transport::godunov_step(&model.flux, grid, &state.u, delta);
                    if kind == Segment::ProjectRamp {
                        let r = nu_rate * delta / eps;
                        state.u = sources::project_inner_apply(grid, &state.u, Strength::Finite(r), 1.0)?;
                        state.v = sources::project_inner_apply(grid, &state.v, Strength::Finite(r), 1.0)?;
                    } else {
                        relax_substep(&model.isotherm, &mut state, mu_rate * delta / eps)?;
                    }
                    check_bounds(&state, a)?;
                }
            }
        }
        state.t = b;
    }
    Ok(state)
}

fn check_bounds(state: &GridState, t: f64) -> Result<()> {
    for (cell, &value) in state.u.iter().chain(&state.v).enumerate() {
        if !(-0.01..=1.01).contains(&value) {
            return Err(Error::Unstable {
                value,
                cell: cell % state.u.len(),
                t,
            });
        }
    }
    Ok(())
}

fn relax_substep(iso: &IsothermSpec, state: &mut GridState, rate: f64) -> Result<()> {
    for (u, v) in state.u.iter_mut().zip(state.v.iter_mut()) {
        let s = *u + *v;
        let v1 = match iso {
            IsothermSpec::Linear => {
                let vstar = 0.5 * s;
                vstar + (*v - vstar) * (-2.0 * rate).exp()
            }
            _ => {
                // backward Euler with inner steps of rate ≤ 0.05
                let inner = (rate / 0.05).ceil().max(1.0) as usize;
                let r = rate / inner as f64;
                let mut w = *v;
                for _ in 0..inner {
                    let w0 = w;
                    let g = |x: f64| x - w0 - r * (iso.value((s - x).clamp(0.0, 1.0)) - x);
                    let lo = (s - 1.0).max(0.0).min(w0);
                    let hi = s.min(1.0).max(w0);
                    w = crate::numeric::bisect(g, lo, hi)?;
                }
                w
            }
        };
        *v = v1;
        *u = s - v1;
    }
    Ok(())
}
