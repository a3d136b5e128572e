//! Godunov convection of `u` on the fine grid. `v` has no transport term
//! and is left untouched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, GridSpec, GridState};
use crate::model::FluxSpec;

/// Courant number for the fine-grid sub-steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CflPolicy {
    pub courant: f64,
}

impl Default for CflPolicy {
    fn default() -> Self {
        Self { courant: 0.9 }
    }
}

impl CflPolicy {
    pub fn new(courant: f64) -> Result<Self> {
        let p = Self { courant };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.courant > 0.0 && self.courant <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "courant number must lie in (0, 1], got {}",
                self.courant
            )));
        }
        Ok(())
    }

    /// Largest admissible fine step `courant · dx / Lip(f)`.
    pub fn max_step(&self, flux: &FluxSpec, grid: &GridSpec) -> f64 {
        self.courant * grid.dx() / flux.lip_bound()
    }

    /// Step sizes tiling `[0, dt]` exactly: full steps followed by one
    /// shortened step, or equal steps when `dt` is (to 1e-12) a whole
    /// number of full steps.
    pub fn substeps(&self, flux: &FluxSpec, grid: &GridSpec, dt: f64) -> Vec<f64> {
        tile(dt, self.max_step(flux, grid))
    }

    pub(crate) fn check_step(&self, flux: &FluxSpec, grid: &GridSpec, step: f64) -> Result<()> {
        let limit = self.courant * grid.dx();
        if step * flux.lip_bound() > limit * (1.0 + 1e-12) + 1e-15 {
            return Err(Error::Cfl { step, limit });
        }
        Ok(())
    }
}

pub(crate) fn tile(dt: f64, max_step: f64) -> Vec<f64> {
    if dt <= 0.0 {
        return Vec::new();
    }
    let k = dt / max_step;
    let nearest = k.round();
    if nearest >= 1.0 && (k - nearest).abs() <= 1e-12 * k.max(1.0) {
        let n = nearest as usize;
        return vec![dt / n as f64; n];
    }
    let full = k.floor() as usize;
    let mut steps = vec![max_step; full];
    let rem = dt - full as f64 * max_step;
    if rem > 0.0 {
        steps.push(rem);
    }
    steps
}

/// Godunov interface flux: `min f` over `[uL, uR]` when `uL ≤ uR`,
/// `max f` over `[uR, uL]` otherwise.
pub fn godunov_flux(flux: &FluxSpec, ul: f64, ur: f64) -> f64 {
    let (fl, fr) = (flux.value(ul), flux.value(ur));
    if ul <= ur {
        match flux.sonic_point() {
            Some(s) if ul <= s && s <= ur => flux.value(s).min(fl).min(fr),
            _ => fl.min(fr),
        }
    } else {
        fl.max(fr)
    }
}

/// Left/right states at the `n + 1` interfaces, ghost cells included.
pub(crate) fn interface_states(grid: &GridSpec, u: &[f64]) -> Vec<(f64, f64)> {
    let n = u.len();
    let (left_ghost, right_ghost) = match grid.boundary {
        Boundary::Periodic => (u[n - 1], u[0]),
        Boundary::Outflow => (u[0], u[n - 1]),
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push((left_ghost, u[0]));
    out.extend(u.windows(2).map(|w| (w[0], w[1])));
    out.push((u[n - 1], right_ghost));
    out
}

/// One conservative Godunov update of length `step`.
pub fn godunov_step(flux: &FluxSpec, grid: &GridSpec, u: &[f64], step: f64) -> Vec<f64> {
    let fluxes: Vec<f64> = interface_states(grid, u)
        .into_iter()
        .map(|(l, r)| godunov_flux(flux, l, r))
        .collect();
    let lambda = step / grid.dx();
    u.iter()
        .zip(fluxes.windows(2))
        .map(|(&uj, f)| uj - lambda * (f[1] - f[0]))
        .collect()
}

/// Advances `u` over `dt` with CFL-limited sub-steps; `v` is frozen.
pub fn convect(
    state: &GridState,
    flux: &FluxSpec,
    grid: &GridSpec,
    dt: f64,
    policy: &CflPolicy,
) -> Result<GridState> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative convection time {dt}")));
    }
    grid.check_len(&state.u)?;
    let mut u = state.u.clone();
    for step in policy.substeps(flux, grid, dt) {
        policy.check_step(flux, grid, step)?;
        u = godunov_step(flux, grid, &u, step);
    }
    Ok(GridState {
        u,
        v: state.v.clone(),
        t: state.t + dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LIN: FluxSpec = FluxSpec::Linear { c: 1.0 };

    #[test]
    fn godunov_flux_examples() {
        assert_eq!(godunov_flux(&LIN, 0.3, 0.9), 0.3);
        assert_eq!(godunov_flux(&FluxSpec::Quadratic, 1.0, 0.0), 0.5);
        for f in [LIN, FluxSpec::Quadratic, FluxSpec::Linear { c: 2.5 }] {
            for a in [0.0, 0.2, 0.75, 1.0] {
                assert_eq!(godunov_flux(&f, a, a), f.value(a));
            }
        }
        // monotone increasing flux on [0, 1]: upwind value
        assert_eq!(godunov_flux(&FluxSpec::Quadratic, 0.2, 0.8), FluxSpec::Quadratic.value(0.2));
    }

    #[test]
    fn tiling_covers_interval_exactly() {
        let steps = tile(1.0, 0.3);
        assert_eq!(steps.len(), 4);
        assert!((steps.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(steps.iter().all(|&s| s <= 0.3));
        assert_eq!(tile(0.9, 0.3).len(), 3);
        assert!(tile(0.0, 0.3).is_empty());
        assert_eq!(tile(0.01, 0.01), vec![0.01]);
    }

    #[test]
    fn constant_state_unchanged() {
        let g = GridSpec::unit(10, 4);
        let s = GridState::new(&g, vec![0.4; 40], vec![0.1; 40]).unwrap();
        let out = convect(&s, &FluxSpec::Quadratic, &g, 0.37, &CflPolicy::default()).unwrap();
        assert!(out.u.iter().all(|&x| (x - 0.4).abs() < 1e-15));
        assert_eq!(out.v, s.v);
        assert!((out.t - 0.37).abs() < 1e-15);
    }

    #[test]
    fn unit_courant_shifts_one_cell() {
        let g = GridSpec::unit(5, 2);
        let u: Vec<f64> = (0..10).map(|i| (i as f64 * 0.73).sin().abs()).collect();
        let s = GridState::new(&g, u.clone(), vec![0.0; 10]).unwrap();
        let out = convect(&s, &LIN, &g, g.dx(), &CflPolicy::new(1.0).unwrap()).unwrap();
        for i in 0..10 {
            assert!((out.u[i] - u[(i + 9) % 10]).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_shock_speed() {
        let g = GridSpec {
            boundary: Boundary::Outflow,
            ..GridSpec::unit(50, 4)
        };
        let s = GridState::from_functions(&g, |x| if x < 0.2 { 1.0 } else { 0.0 }, |_| 0.0).unwrap();
        let out = convect(&s, &FluxSpec::Quadratic, &g, 0.4, &CflPolicy::default()).unwrap();
        // front located where u crosses 1/2
        let i = out.u.iter().position(|&x| x < 0.5).unwrap();
        let (xl, xr) = (g.center(i - 1), g.center(i));
        let (ul, ur) = (out.u[i - 1], out.u[i]);
        let front = xl + (ul - 0.5) / (ul - ur) * (xr - xl);
        assert!((front - 0.4).abs() <= g.dx(), "front at {front}");
    }

    #[test]
    fn negative_time_rejected() {
        let g = GridSpec::unit(4, 1);
        let s = GridState::zeros(&g);
        assert!(convect(&s, &LIN, &g, -1.0, &CflPolicy::default()).is_err());
        assert!(CflPolicy::new(1.5).is_err());
        assert!(CflPolicy::new(0.0).is_err());
    }

    fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0..1.0f64, n)
    }

    fn flux_strategy() -> impl Strategy<Value = FluxSpec> {
        prop_oneof![Just(LIN), Just(FluxSpec::Quadratic), Just(FluxSpec::Linear { c: 3.0 })]
    }

    proptest! {
        #[test]
        fn monotone_tvd_contractive(
            a in field(40),
            bump in field(40),
            flux in flux_strategy(),
            outflow in any::<bool>(),
            dt in 0.0..0.2f64,
        ) {
            let g = GridSpec {
                boundary: if outflow { Boundary::Outflow } else { Boundary::Periodic },
                ..GridSpec::unit(10, 4)
            };
            // b ≥ a componentwise
            let b: Vec<f64> = a.iter().zip(&bump).map(|(x, y)| x + (1.0 - x) * y).collect();
            let sa = GridState::new(&g, a.clone(), vec![0.0; 40]).unwrap();
            let sb = GridState::new(&g, b.clone(), vec![0.0; 40]).unwrap();
            let p = CflPolicy::default();
            let ra = convect(&sa, &flux, &g, dt, &p).unwrap();
            let rb = convect(&sb, &flux, &g, dt, &p).unwrap();
            for (x, y) in ra.u.iter().zip(&rb.u) {
                prop_assert!(x <= &(y + 1e-13));
            }
            prop_assert!(g.total_variation(&ra.u) <= g.total_variation(&a) + 1e-13);
            // the copied inflow ghost re-injects boundary differences
            if !outflow {
                prop_assert!(g.l1_distance(&ra.u, &rb.u) <= g.l1_distance(&a, &b) + 1e-13);
                prop_assert!((g.mass(&ra.u) - g.mass(&a)).abs() <= 1e-13);
            }
        }
    }
}
