//! Registry of named experiments and the runner that writes their outputs:
//! `manifest.json` (resolved config), run CSVs, field dumps,
//! `results.json` (measurements) and `diagnostics.json` (checks).

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, InitialData, VProfile};
use crate::diagnostics::{self, DiagnosticsSummary};
use crate::equilibrium::{solve_equilibrium, EquilibriumRun};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, GridState};
use crate::output::{fmt17, write_file, write_json};
use crate::sources::{Ordering, Strength};
use crate::splitting::{self, MollifiedConfig, Phase, RunLog, SchemeConfig};
use crate::transport;

type Validate = fn(&ExperimentConfig) -> Result<()>;
type Runner = fn(&Context) -> Result<(Value, DiagnosticsSummary)>;

#[derive(Clone)]
pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    /// Sweep keys the experiment accepts.
    pub sweeps: &'static [&'static str],
    pub default_data: InitialData,
    pub(crate) validate: Validate,
    run: Runner,
}

fn front() -> InitialData {
    InitialData::Riemann {
        u_left: 0.9,
        u_right: 0.1,
        x0: Some(0.3),
        v: VProfile::Equilibrium,
    }
}

fn hump() -> InitialData {
    InitialData::Hump {
        center: 0.3,
        width: 0.2,
        height: 0.8,
        v: VProfile::Equilibrium,
    }
}

pub fn registry() -> Vec<Experiment> {
    vec![
        Experiment {
            name: "layer-demo",
            summary: "oscillating v with u = 0: the first event produces an L1 jump",
            sweeps: &[],
            default_data: InitialData::LayerDemo,
            validate: no_extra_checks,
            run: layer_demo,
        },
        Experiment {
            name: "splitting-order",
            summary: "classical and modified orderings on the same data; final L1 distance",
            sweeps: &[],
            default_data: front(),
            validate: no_extra_checks,
            run: splitting_order,
        },
        Experiment {
            name: "stiff-regime",
            summary: "both orderings against the equilibrium reference over a sweep of mu",
            sweeps: &["mu"],
            default_data: hump(),
            validate: needs_closed_form,
            run: stiff_regime,
        },
        Experiment {
            name: "equilibrium-limit",
            summary: "mu = 1/h^2 refinement study against the equilibrium reference",
            sweeps: &["h"],
            default_data: hump(),
            validate: validate_equilibrium_limit,
            run: equilibrium_limit,
        },
        Experiment {
            name: "contraction",
            summary: "lockstep runs of randomly perturbed pairs; distances must not grow",
            sweeps: &[],
            default_data: hump(),
            validate: no_extra_checks,
            run: contraction,
        },
        Experiment {
            name: "mollified-validation",
            summary: "epsilon-ramp system against the split scheme as epsilon shrinks",
            sweeps: &["epsilon"],
            default_data: hump(),
            validate: validate_mollified,
            run: mollified_validation,
        },
        Experiment {
            name: "relax-mass",
            summary: "cumulative relaxation mass over a sweep of mu and its entropy budget",
            sweeps: &["mu"],
            default_data: InitialData::LayerDemo,
            validate: no_extra_checks,
            run: relax_mass,
        },
    ]
}

pub fn names() -> Vec<&'static str> {
    registry().iter().map(|e| e.name).collect()
}

pub fn lookup(name: &str) -> Option<Experiment> {
    registry().into_iter().find(|e| e.name == name)
}

fn no_extra_checks(_: &ExperimentConfig) -> Result<()> {
    Ok(())
}

fn needs_closed_form(cfg: &ExperimentConfig) -> Result<()> {
    if matches!(cfg.initial_data(), InitialData::CustomCsv { .. }) {
        return Err(Error::config(
            "initial_data",
            format!("experiment `{}` needs closed-form initial data", cfg.name),
        ));
    }
    Ok(())
}

fn validate_equilibrium_limit(cfg: &ExperimentConfig) -> Result<()> {
    needs_closed_form(cfg)?;
    for (i, &h) in equilibrium_hs(cfg).iter().enumerate() {
        let dt = h / cfg.model.flux.lip_bound();
        let k = cfg.scheme.horizon / dt;
        if (k - k.round()).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::config(
                format!("sweeps.h[{i}]"),
                format!(
                    "horizon {} is not a whole multiple of the event spacing {dt} = h / Lip(f)",
                    cfg.scheme.horizon
                ),
            ));
        }
    }
    Ok(())
}

fn validate_mollified(cfg: &ExperimentConfig) -> Result<()> {
    for (key, s) in [("scheme.mu", cfg.scheme.mu), ("scheme.nu", cfg.scheme.nu)] {
        if s.is_infinite() {
            return Err(Error::config(key, "the mollified system needs a finite strength"));
        }
    }
    Ok(())
}

/// Where and how an experiment runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads for sweep members; `None` runs them one at a time.
    pub parallel: Option<usize>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    pool: rayon::ThreadPool,
}

/// Runs `cfg` and writes its outputs below `opts.out_dir`. Returns the
/// diagnostics summary; `summary.all_pass()` decides the exit status.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<DiagnosticsSummary> {
    let experiment = lookup(&cfg.name).ok_or_else(|| Error::config("name", format!("unknown experiment `{}`", cfg.name)))?;
    let threads = opts.parallel.unwrap_or(1).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let ctx = Context {
        cfg,
        out: &opts.out_dir,
        pool,
    };
    write_json(&opts.out_dir.join("manifest.json"), cfg)?;
    let (results, summary) = (experiment.run)(&ctx).map_err(|e| e.context(format!("experiment {}", cfg.name)))?;
    write_json(&opts.out_dir.join("results.json"), &results)?;
    write_json(&opts.out_dir.join("diagnostics.json"), &summary)?;
    Ok(summary)
}

fn dump_state(path: &Path, grid: &GridSpec, state: &GridState) -> Result<()> {
    write_file(path, |out| state.write_csv(grid, out))
}

/// One scheme run in `dir`: `run.csv`, `fields/initial.csv`,
/// `fields/final.csv` and pre/post dumps around the listed events.
type Snapshot = (usize, Phase, GridState);

fn logged_run(
    ctx: &Context,
    grid: &GridSpec,
    scheme: &SchemeConfig,
    dir: &Path,
    events: &[usize],
) -> Result<(GridState, RunLog, DiagnosticsSummary, Vec<Snapshot>)> {
    let cfg = ctx.cfg;
    let state0 = cfg.initial_data().build(grid, &cfg.model)?;
    let mut kept = Vec::new();
    let (out, log) = splitting::run_observed(&state0, &cfg.model, grid, scheme, &cfg.probes, &mut |n, phase, s| {
        if phase != Phase::Initial && events.contains(&n) {
            kept.push((n, phase, s.clone()));
        }
    })?;
    write_file(&dir.join("run.csv"), |w| log.write_csv(w))?;
    dump_state(&dir.join("fields/initial.csv"), grid, &state0)?;
    dump_state(&dir.join("fields/final.csv"), grid, &out)?;
    for (n, phase, s) in &kept {
        let tag = if *phase == Phase::PreEvent { "pre" } else { "post" };
        dump_state(&dir.join(format!("fields/event_{n:04}_{tag}.csv")), grid, s)?;
    }
    let summary = diagnostics::summarize_run(&log, &cfg.model, grid, scheme)?;
    Ok((out, log, summary, kept))
}

fn layer_demo(ctx: &Context) -> Result<(Value, DiagnosticsSummary)> {
    let cfg = ctx.cfg;
    let mut events = cfg.snapshot_events();
    events.push(1);
    let (_, log, mut summary, kept) = logged_run(ctx, &cfg.grid, &cfg.scheme, ctx.out, &events)?;
    let find = |phase| kept.iter().find(|(n, p, _)| *n == 1 && *p == phase).map(|k| &k.2);
    let (Some(pre), Some(post)) = (find(Phase::PreEvent), find(Phase::PostEvent)) else {
        return Err(Error::MissingLog("first event"));
    };
    let jump = pre.l1_distance(post, &cfg.grid);
    summary.require_above("first_event_jump", jump, 0.0);
    let last = log.last().ok_or(Error::MissingLog("final row"))?;
    Ok((
        json!({
            "first_event_jump": jump,
            "relax_mass": last.relax_mass_cum,
            "special_entropy_slack": diagnostics::special_entropy_balance(&log, &cfg.model)?,
        }),
        summary,
    ))
}

fn ordering_name(o: Ordering) -> &'static str {
    match o {
        Ordering::Classical => "classical",
        Ordering::Modified => "modified",
    }
}

fn splitting_order(ctx: &Context) -> Result<(Value, DiagnosticsSummary)> {
    let cfg = ctx.cfg;
    let events = cfg.snapshot_events();
    let mut summary = DiagnosticsSummary::default();
    let mut finals = Vec::new();
    for ordering in [Ordering::Classical, Ordering::Modified] {
        let scheme = SchemeConfig {
            ordering,
            ..cfg.scheme.clone()
        };
        let tag = format!("ordering={}", ordering_name(ordering));
        let (out, _, s, _) = logged_run(ctx, &cfg.grid, &scheme, &ctx.out.join(&tag), &events)?;
        summary.extend(&format!("{tag}/"), s);
        finals.push(out);
    }
    let distance = finals[0].l1_distance(&finals[1], &cfg.grid);
    Ok((json!({ "final_distance": distance }), summary))
}

/// Equilibrium reference on `8 ×` the finest fine-cell count, `m = 1`.
fn reference(ctx: &Context, finest: usize) -> Result<(GridSpec, Vec<f64>)> {
    let cfg = ctx.cfg;
    let rg = GridSpec {
        n_coarse: 8 * finest,
        refine: 1,
        ..cfg.grid
    };
    let w0 = cfg.initial_data().equilibrium_datum(&cfg.grid, &cfg.model)?;
    let run = EquilibriumRun {
        courant: cfg.scheme.cfl.courant,
        ..EquilibriumRun::new(cfg.model.flux, cfg.model.isotherm)
    };
    let w = solve_equilibrium(w0, &run, &rg, cfg.scheme.horizon)?;
    write_file(&ctx.out.join("reference.csv"), |out| {
        use std::io::Write;
        writeln!(out, "x,w")?;
        for (j, wj) in w.iter().enumerate() {
            writeln!(out, "{},{}", fmt17(rg.center(j)), fmt17(*wj))?;
        }
        Ok(())
    })?;
    Ok((rg, w))
}

fn stiff_regime(ctx: &Context) -> Result<(Value, DiagnosticsSummary)> {
    let cfg = ctx.cfg;
    let mus = cfg.sweeps.mu.clone().unwrap_or_else(|| vec![10.0, 100.0, 1000.0, 10000.0]);
    let (rg, w) = reference(ctx, cfg.grid.n_fine())?;
    let members: Vec<(f64, Ordering)> = mus
        .iter()
        .flat_map(|&mu| [Ordering::Classical, Ordering::Modified].map(|o| (mu, o)))
        .collect();
    let outcomes = ctx.pool.install(|| {
        members
            .par_iter()
            .map(|&(mu, ordering)| {
                let scheme = SchemeConfig {
                    mu: Strength::Finite(mu),
                    ordering,
                    ..cfg.scheme.clone()
                };
                let tag = format!("mu={mu},ordering={}", ordering_name(ordering));
                let (out, _, s, _) = logged_run(ctx, &cfg.grid, &scheme, &ctx.out.join(&tag), &[])
                    .map_err(|e| e.context(tag.clone()))?;
                let err = diagnostics::error_vs_reference(&out.u, &cfg.grid, &w, &rg)?;
                Ok((tag, mu, ordering, err, s))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut summary = DiagnosticsSummary::default();
    let mut rows = Vec::new();
    for (tag, mu, ordering, err, s) in outcomes {
        summary.extend(&format!("{tag}/"), s);
        rows.push(json!({ "mu": mu, "ordering": ordering_name(ordering), "l1_error": err }));
    }
    Ok((json!({ "runs": rows }), summary))
}

fn equilibrium_hs(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.sweeps.h.clone().unwrap_or_else(|| vec![1.0 / 50.0, 1.0 / 100.0, 1.0 / 200.0])
}

fn strictly_decreasing_check(summary: &mut DiagnosticsSummary, name: &str, xs: &[f64]) {
    let worst = xs
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    if worst.is_finite() {
        summary.record(name, worst, 0.0, worst < 0.0);
    }
}

fn equilibrium_limit(ctx: &Context) -> Result<(Value, DiagnosticsSummary)> {
    let cfg = ctx.cfg;
    let hs = equilibrium_hs(cfg);
    let len = cfg.grid.x_max - cfg.grid.x_min;
    let grids: Vec<GridSpec> = hs
        .iter()
        .map(|&h| GridSpec {
            n_coarse: (len / h).round() as usize,
            ..cfg.grid
        })
        .collect();
    let finest = grids.iter().map(GridSpec::n_fine).max().unwrap_or(1);
    let (rg, w) = reference(ctx, finest)?;
    let outcomes = ctx.pool.install(|| {
        hs.par_iter()
            .zip(&grids)
            .map(|(&h, grid)| {
                let scheme = SchemeConfig {
                    mu: Strength::Finite(1.0 / (h * h)),
                    dt: h / cfg.model.flux.lip_bound(),
                    ..cfg.scheme.clone()
                };
                let tag = format!("h={h}");
                let (out, _, s, _) = logged_run(ctx, grid, &scheme, &ctx.out.join(&tag), &[])
                    .map_err(|e| e.context(tag.clone()))?;
                let err = diagnostics::error_vs_reference(&out.u, grid, &w, &rg)?;
                Ok((tag, err, s))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut summary = DiagnosticsSummary::default();
    let mut errors = Vec::new();
    for (tag, err, s) in outcomes {
        summary.extend(&format!("{tag}/"), s);
        errors.push(err);
    }
    strictly_decreasing_check(&mut summary, "errors_decreasing", &errors);
    let rate = if hs.len() >= 2 {
        let rate = diagnostics::fit_rate(&hs, &errors)?;
        summary.require_at_least("fitted_rate", rate, 0.4);
        Some(rate)
    } else {
        None
    };
    Ok((json!({ "h": hs, "l1_error": errors, "fitted_rate": rate }), summary))
}

fn contraction(ctx: &Context) -> Result<(Value, DiagnosticsSummary)> {
    let cfg = ctx.cfg;
    let grid = &cfg.grid;
    let base = cfg.initial_data().build(grid, &cfg.model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut perturb = |field: &[f64]| -> Vec<f64> {
        field
            .iter()
            .map(|&x| (x + rng.gen_range(-0.2..0.2)).clamp(0.0, 1.0))
            .collect()
    };
    let partners: Vec<GridState> = (0..cfg.pairs)
        .map(|_| GridState {
            u: perturb(&base.u),
            v: perturb(&base.v),
            t: 0.0,
        })
        .collect();
    let outcomes = ctx.pool.install(|| {
        partners
            .par_iter()
            .enumerate()
            .map(|(i, b)| {
                let d = splitting::run_pair(&base, b, &cfg.model, grid, &cfg.scheme)
                    .map_err(|e| e.context(format!("pair {i}")))?;
                write_file(&ctx.out.join(format!("pair={i}/distance.csv")), |out| {
                    use std::io::Write;
                    writeln!(out, "t,l1_distance")?;
                    for (t, x) in &d {
                        writeln!(out, "{},{}", fmt17(*t), fmt17(*x))?;
                    }
                    Ok(())
                })?;
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut summary = DiagnosticsSummary::default();
    let mut rows = Vec::new();
    for (i, d) in outcomes.iter().enumerate() {
        let growth = d
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::NEG_INFINITY, f64::max);
        summary.add(format!("pair={i}/nonincreasing"), growth.max(0.0), 1e-12);
        rows.push(json!({
            "pair": i,
            "initial_distance": d.first().map(|x| x.1),
            "final_distance": d.last().map(|x| x.1),
        }));
    }
    Ok((json!({ "pairs": rows }), summary))
}

fn mollified_validation(ctx: &Context) -> Result<(Value, DiagnosticsSummary)> {
    let cfg = ctx.cfg;
    let grid = &cfg.grid;
    let dt = cfg.scheme.dt;
    let eps = cfg.sweeps.epsilon.clone().unwrap_or_else(|| vec![dt / 4.0, dt / 8.0, dt / 16.0]);
    let (split, _, mut summary, _) = logged_run(ctx, grid, &cfg.scheme, ctx.out, &[])?;
    let state0 = cfg.initial_data().build(grid, &cfg.model)?;
    let dists = ctx.pool.install(|| {
        eps.par_iter()
            .map(|&e| {
                let moll = MollifiedConfig {
                    epsilon: e,
                    ramp_substeps: cfg.ramp_substeps,
                };
                let m = splitting::run_mollified(&state0, &cfg.model, grid, &cfg.scheme, &moll)
                    .map_err(|err| err.context(format!("epsilon = {e}")))?;
                dump_state(&ctx.out.join(format!("epsilon={e}/fields/final.csv")), grid, &m)?;
                // the mollified run ends at T + ε
                let shifted = transport::convect(&split, &cfg.model.flux, grid, e, &cfg.scheme.cfl)?;
                Ok(m.l1_distance(&shifted, grid))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    strictly_decreasing_check(&mut summary, "distances_decreasing", &dists);
    let order = if eps.len() >= 2 {
        let order = diagnostics::fit_rate(&eps, &dists)?;
        summary.require_at_least("fitted_order", order, 0.8);
        Some(order)
    } else {
        None
    };
    Ok((json!({ "epsilon": eps, "l1_distance": dists, "fitted_order": order }), summary))
}

fn relax_mass(ctx: &Context) -> Result<(Value, DiagnosticsSummary)> {
    let cfg = ctx.cfg;
    let mus = cfg.sweeps.mu.clone().unwrap_or_else(|| vec![10.0, 100.0, 1000.0, 10000.0]);
    let state0 = cfg.initial_data().build(&cfg.grid, &cfg.model)?;
    let points = ctx
        .pool
        .install(|| diagnostics::relax_mass_sweep(&state0, &cfg.model, &cfg.grid, &cfg.scheme, &mus))?;
    let mut summary = DiagnosticsSummary::default();
    let lip = cfg.model.isotherm.lip_bound();
    for p in &points {
        summary.add(
            format!("mu={}/entropy_budget", p.mu),
            p.relax_quadratic - lip * p.entropy_drop,
            1e-10,
        );
    }
    let ratio = |f: fn(&diagnostics::SweepPoint) -> f64| {
        let max = points.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let min = points.iter().map(f).fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            1.0
        } else {
            max / min
        }
    };
    let (r1, r2) = (ratio(|p| p.relax_mass), ratio(|p| p.relax_quadratic));
    summary.add("mass_ratio_l1", r1, 4.0);
    summary.add("mass_ratio_quadratic", r2, 4.0);
    Ok((json!({ "sweep": points, "ratio_l1": r1, "ratio_quadratic": r2 }), summary))
}
