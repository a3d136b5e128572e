//! Reference solver for the equilibrium limit `∂t(w + A(w)) + ∂x f(w) = 0`.
//!
//! The conserved variable is `z = w + A(w)` with flux `F(z) = f(W(z))`,
//! where `W` inverts `z`. `F` is nondecreasing, so the Godunov flux is the
//! upwind value `F(z_left)`.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{EquilibriumMap, FluxSpec, IsothermSpec};
use crate::transport::{interface_states, tile};

const TABLE_SPACING: f64 = 1e-4;

/// `W(z)` with a precomputed table of `W` at `z = i · 1e-4`, so that each
/// inversion bisects only inside one table bracket.
#[derive(Debug, Clone)]
pub struct InverseTable {
    map: EquilibriumMap,
    nodes: Vec<f64>,
}

impl InverseTable {
    pub fn new(isotherm: IsothermSpec) -> Result<Self> {
        isotherm.validate()?;
        let map = EquilibriumMap::new(isotherm);
        let n = (2.0 / TABLE_SPACING).round() as usize;
        let nodes = (0..=n)
            .map(|i| map.invert((i as f64 * TABLE_SPACING).min(2.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { map, nodes })
    }

    pub fn invert(&self, z: f64) -> Result<f64> {
        let z = crate::model::check_interval("z", z, 0.0, 2.0)?;
        let i = ((z / TABLE_SPACING) as usize).min(self.nodes.len() - 2);
        // widen by one ulp-ish margin so the table's own rounding cannot
        // exclude the root
        let lo = (self.nodes[i] - 1e-15).max(0.0);
        let hi = (self.nodes[i + 1] + 1e-15).min(1.0);
        self.map.invert_within(z, lo, hi)
    }
}

/// Parameters of an equilibrium reference solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumRun {
    pub flux: FluxSpec,
    pub isotherm: IsothermSpec,
    pub courant: f64,
}

impl EquilibriumRun {
    pub fn new(flux: FluxSpec, isotherm: IsothermSpec) -> Self {
        Self {
            flux,
            isotherm,
            courant: 0.9,
        }
    }

    /// `Lip(F) ≤ Lip(f) / (1 + inf A')`.
    pub fn lip_bound(&self) -> f64 {
        self.flux.lip_bound() / (1.0 + self.isotherm.min_slope())
    }
}

/// Solves the equilibrium law on the fine cells of `grid` up to `horizon`
/// and returns the cell values of `w`. The initial `z` is the exact cell
/// average of `w0(x) + A(w0(x))`.
pub fn solve_equilibrium<F: Fn(f64) -> f64>(
    w0: F,
    run: &EquilibriumRun,
    grid: &GridSpec,
    horizon: f64,
) -> Result<Vec<f64>> {
    run.flux.validate()?;
    grid.validate()?;
    if !(run.courant > 0.0 && run.courant <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "courant number must lie in (0, 1], got {}",
            run.courant
        )));
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative horizon {horizon}")));
    }
    let table = InverseTable::new(run.isotherm)?;
    let map = EquilibriumMap::new(run.isotherm);
    let mut z = grid.cell_averages(|x| map.forward(w0(x).clamp(0.0, 1.0)));
    let mut w = z.iter().map(|&zj| table.invert(zj)).collect::<Result<Vec<_>>>()?;
    let dx = grid.dx();
    for step in tile(horizon, run.courant * dx / run.lip_bound()) {
        let lambda = step / dx;
        let states = interface_states(grid, &w);
        let fluxes: Vec<f64> = states.iter().map(|&(l, _)| run.flux.value(l)).collect();
        for (j, zj) in z.iter_mut().enumerate() {
            *zj -= lambda * (fluxes[j + 1] - fluxes[j]);
        }
        w = z.iter().map(|&zj| table.invert(zj)).collect::<Result<Vec<_>>>()?;
    }
    Ok(w)
}
