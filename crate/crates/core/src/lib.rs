//! Finite-volume lab for the 2×2 chromatography relaxation system
//!
//! ```text
//! ∂t(u + v) + ∂x f(u) = 0,    ∂t v = μ (A(u) - v),
//! ```
//!
//! solved by time splitting: Godunov convection of `u` on a fine grid,
//! interrupted at every `t = nΔt` by an event combining a projection onto
//! coarse-cell means and a relaxation of `v` toward `A(u)`.

// `!(x > 0.0)` style guards are there to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod numeric;
pub mod output;
pub mod sources;
pub mod splitting;
pub mod transport;

pub use config::{load_config, parse_config, ExperimentConfig, InitialData};
pub use error::{Error, Result};
pub use experiments::{run_experiment, RunOptions};
pub use grid::{Boundary, GridSpec, GridState};
pub use model::{EquilibriumMap, FluxSpec, IsothermSpec};
pub use sources::{Ordering, RelaxSolver, Strength};
pub use splitting::{Model, MollifiedConfig, RunLog, SchemeConfig};
pub use transport::CflPolicy;
