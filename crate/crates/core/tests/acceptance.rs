//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use relaxlab::diagnostics::{error_vs_reference, fit_rate, relax_mass_sweep};
use relaxlab::equilibrium::{solve_equilibrium, EquilibriumRun};
use relaxlab::sources::{relax_inner_solve, InnerOdeProblem};
use relaxlab::splitting::{run, run_mollified, run_pair, Model, MollifiedConfig, Phase};
use relaxlab::{
    transport, CflPolicy, FluxSpec, GridSpec, GridState, IsothermSpec, Ordering, SchemeConfig,
    Strength,
};

const LANGMUIR: IsothermSpec = IsothermSpec::Langmuir { beta: 1.0 };
const FLUXES: [FluxSpec; 2] = [FluxSpec::Linear { c: 1.0 }, FluxSpec::Quadratic];
const ISOTHERMS: [IsothermSpec; 2] = [IsothermSpec::Linear, LANGMUIR];
const ORDERINGS: [Ordering; 2] = [Ordering::Classical, Ordering::Modified];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn hump(x: f64) -> f64 {
    let r = (x - 0.3) / 0.2;
    if r.abs() < 1.0 {
        0.8 * (0.5 * PI * r).cos().powi(2)
    } else {
        0.0
    }
}

fn entropy_state(g: &GridSpec) -> GridState {
    GridState::from_functions(
        g,
        |x| if x < 0.5 { 0.9 } else { 0.1 },
        |x| 0.2 + 0.5 * (3.0 * PI * x).sin().powi(2),
    )
    .unwrap()
}

/// Entropy-suite matrix; each run's log is also used by the bounds check.
fn entropy_matrix() -> Vec<(String, relaxlab::RunLog)> {
    let g = GridSpec::unit(100, 8);
    let state = entropy_state(&g);
    let mut cases = Vec::new();
    for flux in FLUXES {
        for iso in ISOTHERMS {
            for ordering in ORDERINGS {
                for mu in [Strength::Finite(1.0), Strength::Finite(10.0), Strength::Infinite] {
                    cases.push((flux, iso, ordering, mu));
                }
            }
        }
    }
    cases
        .par_iter()
        .map(|&(flux, iso, ordering, mu)| {
            let cfg = SchemeConfig {
                ordering,
                mu,
                nu: Strength::Infinite,
                dt: 0.01,
                horizon: 1.0,
                ..Default::default()
            };
            let (_, log) = run(&state, &Model::new(flux, iso), &g, &cfg).unwrap();
            (format!("{flux:?}/{iso:?}/{ordering:?}/{mu:?}"), log)
        })
        .collect()
}

fn criterion_1(logs: &[(String, relaxlab::RunLog)]) -> Outcome {
    let mut worst_convect = f64::NEG_INFINITY;
    let mut worst_event = f64::NEG_INFINITY;
    for (_, log) in logs {
        worst_convect = worst_convect.max(log.max_convect_residual());
        worst_event = worst_event.max(log.max_event_residual());
    }
    outcome(
        worst_convect <= 1e-12 && worst_event <= 1e-10,
        format!(
            "{} runs, max convect residual {worst_convect:.3e} (tol 1e-12), max event residual {worst_event:.3e} (tol 1e-10)",
            logs.len()
        ),
    )
}

fn criterion_2() -> Outcome {
    let g = GridSpec::unit(20, 4);
    let model = Model::new(FluxSpec::Quadratic, LANGMUIR);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let random_state = |rng: &mut ChaCha8Rng| {
        let n = g.n_fine();
        let u = (0..n).map(|_| rng.gen::<f64>()).collect();
        let v = (0..n).map(|_| rng.gen::<f64>()).collect();
        GridState::new(&g, u, v).unwrap()
    };
    let pairs: Vec<(GridState, GridState)> = (0..20)
        .map(|_| (random_state(&mut rng), random_state(&mut rng)))
        .collect();
    let mut worst_increase = f64::NEG_INFINITY;
    let mut runs = 0;
    for (a, b) in &pairs {
        for ordering in ORDERINGS {
            for mu in [Strength::Finite(10.0), Strength::Infinite] {
                let cfg = SchemeConfig {
                    ordering,
                    mu,
                    dt: 0.05,
                    horizon: 0.5,
                    ..Default::default()
                };
                let d = run_pair(a, b, &model, &g, &cfg).unwrap();
                for w in d.windows(2) {
                    worst_increase = worst_increase.max(w[1].1 - w[0].1);
                }
                runs += 1;
            }
        }
    }
    outcome(
        worst_increase <= 1e-12,
        format!("{runs} paired runs, largest step-to-step increase {worst_increase:.3e} (tol 1e-12)"),
    )
}

fn criterion_3(logs: &[(String, relaxlab::RunLog)]) -> Outcome {
    let mut worst_l1 = f64::NEG_INFINITY;
    let mut worst_tv = f64::NEG_INFINITY;
    for (_, log) in logs {
        for w in log.rows.windows(2) {
            worst_l1 = worst_l1.max((w[1].l1_u + w[1].l1_v) - (w[0].l1_u + w[0].l1_v));
            worst_tv = worst_tv.max((w[1].tv_u + w[1].tv_v) - (w[0].tv_u + w[0].tv_v));
        }
    }
    outcome(
        worst_l1 <= 1e-12 && worst_tv <= 1e-12,
        format!("largest increase of l1 sum {worst_l1:.3e}, of TV sum {worst_tv:.3e} (tol 1e-12)"),
    )
}

fn criterion_4() -> Outcome {
    let g = GridSpec::unit(50, 8);
    let h = g.h();
    let model = Model::new(FluxSpec::Quadratic, LANGMUIR);
    let state = GridState::from_functions(&g, |_| 0.0, |x| (PI * x / h).sin().clamp(0.0, 1.0)).unwrap();
    let cfg = SchemeConfig {
        dt: h,
        horizon: 0.5,
        ..Default::default()
    };
    let mus = [10.0, 100.0, 1000.0, 10000.0];
    let pts = relax_mass_sweep(&state, &model, &g, &cfg, &mus).unwrap();
    let ratio = |f: fn(&relaxlab::diagnostics::SweepPoint) -> f64| {
        let vals: Vec<f64> = pts.iter().map(f).collect();
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    };
    let ratio_l1 = ratio(|p| p.relax_mass);
    let ratio_quad = ratio(|p| p.relax_quadratic);
    let lip = model.isotherm.lip_bound();
    let worst_slack = pts
        .iter()
        .map(|p| lip * p.entropy_drop + 1e-10 - p.relax_quadratic)
        .fold(f64::INFINITY, f64::min);
    outcome(
        ratio_l1 <= 4.0 && ratio_quad <= 4.0 && worst_slack >= 0.0 && pts.iter().all(|p| p.relax_mass > 0.0),
        format!(
            "max/min ratio {ratio_l1:.4} (l1 mass), {ratio_quad:.4} (quadratic mass); smallest budget slack {worst_slack:.3e}"
        ),
    )
}

fn equilibrium_reference(model: &Model, n: usize) -> (GridSpec, Vec<f64>) {
    let rg = GridSpec::unit(n, 1);
    let w = solve_equilibrium(hump, &EquilibriumRun::new(model.flux, model.isotherm), &rg, 0.5).unwrap();
    (rg, w)
}

fn well_prepared_run(model: &Model, n: usize, mu: f64, ordering: Ordering) -> (GridSpec, GridState) {
    let g = GridSpec::unit(n, 1);
    let iso = model.isotherm;
    let s = GridState::from_functions(&g, hump, |x| iso.value(hump(x))).unwrap();
    let cfg = SchemeConfig {
        ordering,
        mu: Strength::Finite(mu),
        dt: g.h() / model.flux.lip_bound(),
        horizon: 0.5,
        cfl: CflPolicy::new(1.0).unwrap(),
        ..Default::default()
    };
    let (out, _) = run(&s, model, &g, &cfg).unwrap();
    (g, out)
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn criterion_5() -> Outcome {
    let model = Model::new(FluxSpec::Quadratic, LANGMUIR);
    let (rg, reference) = equilibrium_reference(&model, 1600);
    let ns = [50, 100, 200];
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for ordering in ORDERINGS {
        let errs: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let h = 1.0 / n as f64;
                let (g, out) = well_prepared_run(&model, n, 1.0 / (h * h), ordering);
                error_vs_reference(&out.u, &g, &reference, &rg).unwrap()
            })
            .collect();
        let rate = fit_rate(&hs, &errs).unwrap();
        pass &= strictly_decreasing(&errs) && rate >= 0.4;
        detail.push(format!(
            "{ordering:?}: errors {:.3e}, {:.3e}, {:.3e}, rate {rate:.3} (min 0.4)",
            errs[0], errs[1], errs[2]
        ));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_6() -> Outcome {
    let model = Model::new(FluxSpec::Quadratic, LANGMUIR);
    let (rg, reference) = equilibrium_reference(&model, 3200);
    let mus = [10.0, 100.0, 1000.0, 10000.0];
    let errs: Vec<f64> = mus
        .par_iter()
        .map(|&mu| {
            let (g, out) = well_prepared_run(&model, 400, mu, Ordering::Classical);
            error_vs_reference(&out.u, &g, &reference, &rg).unwrap()
        })
        .collect();
    let inv: Vec<f64> = mus.iter().map(|m| 1.0 / m).collect();
    let slope = fit_rate(&inv, &errs).unwrap();
    outcome(
        strictly_decreasing(&errs) && slope >= 0.3,
        format!(
            "errors {:.3e}, {:.3e}, {:.3e}, {:.3e}, slope vs 1/mu {slope:.3} (min 0.3)",
            errs[0], errs[1], errs[2], errs[3]
        ),
    )
}

fn csv_bytes(g: &GridSpec, out: &GridState, log: &relaxlab::RunLog) -> Vec<u8> {
    let mut bytes = Vec::new();
    log.write_csv(&mut bytes).unwrap();
    out.write_csv(g, &mut bytes).unwrap();
    bytes
}

fn criterion_7() -> Outcome {
    let g = GridSpec::unit(100, 1);
    let state = entropy_state(&g);
    let mut identical = 0;
    let mut total = 0;
    for flux in FLUXES {
        for iso in ISOTHERMS {
            let model = Model::new(flux, iso);
            let base = SchemeConfig {
                dt: 0.01,
                horizon: 0.5,
                nu: Strength::Infinite,
                mu: Strength::Finite(10.0),
                ..Default::default()
            };
            let (a, la) = run(&state, &model, &g, &base).unwrap();
            let modified = SchemeConfig {
                ordering: Ordering::Modified,
                ..base
            };
            let (b, lb) = run(&state, &model, &g, &modified).unwrap();
            total += 1;
            if csv_bytes(&g, &a, &la) == csv_bytes(&g, &b, &lb) {
                identical += 1;
            }
        }
    }
    outcome(
        identical == total,
        format!("{identical}/{total} model pairs byte-identical (run log and final field dump)"),
    )
}

fn criterion_8() -> Outcome {
    let g = GridSpec::unit(10, 8);
    let model = Model::new(FluxSpec::Quadratic, LANGMUIR);
    let u0 = |x: f64| if x < 0.3 { 0.9 } else { 0.1 };
    let state = GridState::from_functions(&g, u0, |x| LANGMUIR.value(u0(x))).unwrap();
    let dt = g.h();
    let base = SchemeConfig {
        dt,
        horizon: 2.0 * dt,
        mu: Strength::Finite(50.0 / dt),
        ..Default::default()
    };
    let (a, _) = run(&state, &model, &g, &base).unwrap();
    let modified = SchemeConfig {
        ordering: Ordering::Modified,
        ..base
    };
    let (b, _) = run(&state, &model, &g, &modified).unwrap();
    let d = a.l1_distance(&b, &g);
    outcome(d > 1e-3, format!("final-state distance between orderings {d:.3e} (min 1e-3)"))
}

fn criterion_9() -> Outcome {
    let g = GridSpec::unit(50, 4);
    let model = Model::new(FluxSpec::Quadratic, IsothermSpec::Linear);
    let state = GridState::from_functions(&g, hump, |x| 0.5 * hump(x - 0.1)).unwrap();
    let cfg = SchemeConfig {
        mu: Strength::Finite(20.0),
        nu: Strength::Finite(20.0),
        dt: 0.02,
        horizon: 0.08,
        ..Default::default()
    };
    let (split, _) = run(&state, &model, &g, &cfg).unwrap();
    let eps: Vec<f64> = [4.0, 8.0, 16.0].iter().map(|k| cfg.dt / k).collect();
    let dists: Vec<f64> = eps
        .iter()
        .map(|&e| {
            // the mollified run ends at T + ε, after the last relaxation ramp
            let shifted = transport::convect(&split, &model.flux, &g, e, &cfg.cfl).unwrap();
            let moll = run_mollified(&state, &model, &g, &cfg, &MollifiedConfig::new(e)).unwrap();
            moll.l1_distance(&shifted, &g)
        })
        .collect();
    let order = fit_rate(&eps, &dists).unwrap();
    outcome(
        strictly_decreasing(&dists) && order >= 0.8,
        format!(
            "distances {:.3e}, {:.3e}, {:.3e}, fitted order {order:.3} (min 0.8)",
            dists[0], dists[1], dists[2]
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..1000 {
        let iso = if i % 2 == 0 {
            IsothermSpec::Linear
        } else {
            IsothermSpec::Langmuir {
                beta: rng.gen_range(0.0..5.0),
            }
        };
        let u0: f64 = rng.gen();
        let v0: f64 = rng.gen();
        let rate = 10f64.powf(rng.gen_range(-3.0..3.0));
        let (u1, v1) = relax_inner_solve(&iso, &InnerOdeProblem::new(u0, v0, rate), Strength::Finite(1.0)).unwrap();
        let before = (iso.value(u0) - v0).abs();
        let after = (iso.value(u1) - v1).abs();
        worst = worst.max(after - (-rate).exp() * before);
    }
    outcome(
        worst <= 1e-12,
        format!("1000 inner problems, largest excess over the decay bound {worst:.3e} (tol 1e-12)"),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let started = Instant::now();
    let logs = entropy_matrix();
    assert!(logs.iter().all(|(_, l)| l.rows.iter().any(|r| r.phase == Phase::PostEvent)));
    let criteria: Vec<Criterion> = vec![
        ("entropy suite", Box::new(|| criterion_1(&logs))),
        ("pairwise contraction", Box::new(criterion_2)),
        ("l1 and TV bounds", Box::new(|| criterion_3(&logs))),
        ("relaxation-mass uniformity", Box::new(criterion_4)),
        ("equilibrium limit", Box::new(criterion_5)),
        ("relaxation-strength rate", Box::new(criterion_6)),
        ("ordering equivalence without refinement", Box::new(criterion_7)),
        ("ordering distinction on a stiff front", Box::new(criterion_8)),
        ("mollified oracle", Box::new(criterion_9)),
        ("layer decay", Box::new(criterion_10)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} [{}] {name}: {} ({:.1}s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failures} failed in {:.1}s",
        criteria.len() - failures,
        started.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
