//! Uniform grid of coarse cells, each split into `refine` fine sub-cells,
//! and the cell-averaging projector onto coarse piecewise constants.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DOMAIN_SLACK;
use crate::numeric::GAUSS3;
use crate::output::fmt17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "GridSpec::default_x_min")]
    pub x_min: f64,
    #[serde(default = "GridSpec::default_x_max")]
    pub x_max: f64,
    #[serde(default = "GridSpec::default_n_coarse")]
    pub n_coarse: usize,
    #[serde(default = "GridSpec::default_refine")]
    pub refine: usize,
    #[serde(default)]
    pub boundary: Boundary,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_min: Self::default_x_min(),
            x_max: Self::default_x_max(),
            n_coarse: Self::default_n_coarse(),
            refine: Self::default_refine(),
            boundary: Boundary::Periodic,
        }
    }
}

impl GridSpec {
    fn default_x_min() -> f64 {
        0.0
    }
    fn default_x_max() -> f64 {
        1.0
    }
    fn default_n_coarse() -> usize {
        100
    }
    fn default_refine() -> usize {
        8
    }

    pub fn new(x_min: f64, x_max: f64, n_coarse: usize, refine: usize, boundary: Boundary) -> Result<Self> {
        let g = Self {
            x_min,
            x_max,
            n_coarse,
            refine,
            boundary,
        };
        g.validate()?;
        Ok(g)
    }

    /// Periodic unit interval.
    pub fn unit(n_coarse: usize, refine: usize) -> Self {
        Self {
            n_coarse,
            refine,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(Error::InvalidParameter(format!(
                "grid domain [{}, {}) is empty",
                self.x_min, self.x_max
            )));
        }
        if self.n_coarse == 0 || self.refine == 0 {
            return Err(Error::InvalidParameter(
                "n_coarse and refine must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Coarse cell width.
    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_coarse as f64
    }

    /// Fine cell width `h / m`.
    pub fn dx(&self) -> f64 {
        self.h() / self.refine as f64
    }

    pub fn n_fine(&self) -> usize {
        self.n_coarse * self.refine
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_fine()).map(|i| self.center(i)).collect()
    }

    pub(crate) fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n_fine() {
            return Err(Error::LengthMismatch {
                expected: self.n_fine(),
                got: field.len(),
            });
        }
        Ok(())
    }

    /// Replaces every fine value by the mean over its coarse cell.
    pub fn project(&self, field: &[f64]) -> Result<Vec<f64>> {
        self.check_len(field)?;
        let m = self.refine;
        let mut out = Vec::with_capacity(field.len());
        for block in field.chunks_exact(m) {
            let mean = block.iter().sum::<f64>() / m as f64;
            out.extend(std::iter::repeat_n(mean, m));
        }
        Ok(out)
    }

    /// One value per coarse cell: the mean of its sub-cells.
    pub fn coarse_means(&self, field: &[f64]) -> Result<Vec<f64>> {
        self.check_len(field)?;
        Ok(field
            .chunks_exact(self.refine)
            .map(|b| b.iter().sum::<f64>() / self.refine as f64)
            .collect())
    }

    /// Three-point Gauss–Legendre cell average of `g` over every fine cell.
    pub fn cell_averages<F: Fn(f64) -> f64>(&self, g: F) -> Vec<f64> {
        let half = 0.5 * self.dx();
        (0..self.n_fine())
            .map(|i| {
                let mid = self.center(i);
                let gm = g(mid);
                // written as a correction to the midpoint value so constants are exact
                gm + 0.5 * GAUSS3.iter().map(|&(x, w)| w * (g(mid + half * x) - gm)).sum::<f64>()
            })
            .collect()
    }

    /// `Σ |field| dx`.
    pub fn l1_norm(&self, field: &[f64]) -> f64 {
        field.iter().map(|x| x.abs()).sum::<f64>() * self.dx()
    }

    /// `Σ |a - b| dx`.
    pub fn l1_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * self.dx()
    }

    /// Sum of jumps, including the wrap-around jump on periodic grids.
    pub fn total_variation(&self, field: &[f64]) -> f64 {
        let interior: f64 = field.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        match (self.boundary, field.first(), field.last()) {
            (Boundary::Periodic, Some(first), Some(last)) => interior + (first - last).abs(),
            _ => interior,
        }
    }

    /// `Σ field dx`.
    pub fn mass(&self, field: &[f64]) -> f64 {
        field.iter().sum::<f64>() * self.dx()
    }
}

/// Paired fields on the fine cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl GridState {
    pub fn new(grid: &GridSpec, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let s = Self { u, v, t: 0.0 };
        s.validate(grid)?;
        Ok(s)
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            u: vec![0.0; grid.n_fine()],
            v: vec![0.0; grid.n_fine()],
            t: 0.0,
        }
    }

    /// Samples `u0` and `v0` by cell averages at `t = 0`.
    pub fn from_functions<U, V>(grid: &GridSpec, u0: U, v0: V) -> Result<Self>
    where
        U: Fn(f64) -> f64,
        V: Fn(f64) -> f64,
    {
        let mut u = grid.cell_averages(u0);
        let mut v = grid.cell_averages(v0);
        clamp_checked("u0", &mut u)?;
        clamp_checked("v0", &mut v)?;
        Ok(Self { u, v, t: 0.0 })
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        grid.check_len(&self.u)?;
        grid.check_len(&self.v)?;
        for (what, field) in [("u", &self.u), ("v", &self.v)] {
            if let Some(&bad) = field
                .iter()
                .find(|x| !(**x >= -DOMAIN_SLACK && **x <= 1.0 + DOMAIN_SLACK))
            {
                return Err(Error::Domain {
                    what,
                    value: bad,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        Ok(())
    }

    /// `l1(u - ũ) + l1(v - ṽ)`.
    pub fn l1_distance(&self, other: &GridState, grid: &GridSpec) -> f64 {
        grid.l1_distance(&self.u, &other.u) + grid.l1_distance(&self.v, &other.v)
    }

    /// Field dump: header `x,u,v`, one row per fine cell center.
    pub fn write_csv<W: Write>(&self, grid: &GridSpec, mut out: W) -> Result<()> {
        writeln!(out, "x,u,v")?;
        for i in 0..self.u.len() {
            writeln!(
                out,
                "{},{},{}",
                fmt17(grid.center(i)),
                fmt17(self.u[i]),
                fmt17(self.v[i])
            )?;
        }
        Ok(())
    }
}

fn clamp_checked(what: &'static str, field: &mut [f64]) -> Result<()> {
    for x in field.iter_mut() {
        *x = crate::model::check_unit(what, *x)?;
    }
    Ok(())
}
