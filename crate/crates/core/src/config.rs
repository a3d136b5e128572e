//! Experiment configuration: JSON parsing with path-qualified errors,
//! defaults and validation.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::experiments;
use crate::grid::{GridSpec, GridState};
use crate::model::IsothermSpec;
use crate::splitting::{Model, SchemeConfig, DEFAULT_PROBES};

/// Initial `v`: the equilibrium `A(u0)` or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum VProfile {
    #[default]
    Equilibrium,
    Constant(f64),
}

impl Serialize for VProfile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            VProfile::Equilibrium => s.serialize_str("equilibrium"),
            VProfile::Constant(x) => s.serialize_f64(x),
        }
    }
}

impl<'de> Deserialize<'de> for VProfile {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(VProfile::Constant(x)),
            Raw::Text(t) if t == "equilibrium" => Ok(VProfile::Equilibrium),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "expected a number or \"equilibrium\", got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `u = u_left` for `x < x0`, `u_right` after. `x0` defaults to the
    /// domain midpoint.
    Riemann {
        u_left: f64,
        u_right: f64,
        #[serde(default)]
        x0: Option<f64>,
        #[serde(default)]
        v: VProfile,
    },
    /// `u = height · cos²(π r / 2)` for `|r| < 1`, `r = (x - center) / width`.
    Hump {
        center: f64,
        width: f64,
        height: f64,
        #[serde(default)]
        v: VProfile,
    },
    /// `u ≡ 0`, `v = sin(π (x - x_min) / h)` clipped to `[0, 1]`.
    LayerDemo,
    /// Fine-cell values from a CSV with header `x,u,v`.
    CustomCsv { path: PathBuf },
}

impl InitialData {
    fn v_profile(v: VProfile, iso: IsothermSpec, u: f64) -> f64 {
        match v {
            VProfile::Equilibrium => iso.value(u.clamp(0.0, 1.0)),
            VProfile::Constant(c) => c,
        }
    }

    /// `u0` as a function of `x`, where it has a closed form.
    fn u_fn(&self, grid: &GridSpec) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        match *self {
            InitialData::Riemann {
                u_left, u_right, x0, ..
            } => {
                let x0 = x0.unwrap_or(0.5 * (grid.x_min + grid.x_max));
                Some(Box::new(move |x| if x < x0 { u_left } else { u_right }))
            }
            InitialData::Hump {
                center,
                width,
                height,
                ..
            } => Some(Box::new(move |x| {
                let r = (x - center) / width;
                if r.abs() < 1.0 {
                    height * (0.5 * PI * r).cos().powi(2)
                } else {
                    0.0
                }
            })),
            InitialData::LayerDemo => Some(Box::new(|_| 0.0)),
            InitialData::CustomCsv { .. } => None,
        }
    }

    /// Cell-averaged initial state on `grid`.
    pub fn build(&self, grid: &GridSpec, model: &Model) -> Result<GridState> {
        let iso = model.isotherm;
        match self {
            InitialData::Riemann { v, .. } | InitialData::Hump { v, .. } => {
                let u = self.u_fn(grid).expect("closed form");
                let v = *v;
                GridState::from_functions(grid, &u, |x| Self::v_profile(v, iso, u(x)))
            }
            InitialData::LayerDemo => {
                let (x_min, h) = (grid.x_min, grid.h());
                GridState::from_functions(grid, |_| 0.0, |x| (PI * (x - x_min) / h).sin().clamp(0.0, 1.0))
            }
            InitialData::CustomCsv { path } => read_state_csv(path, grid),
        }
    }

    /// Equilibrium initial datum `w0` with `w0 + A(w0) = u0 + v0`, used by
    /// the reference solver.
    pub fn equilibrium_datum(&self, grid: &GridSpec, model: &Model) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        let iso = model.isotherm;
        match self {
            InitialData::Riemann { v, .. } | InitialData::Hump { v, .. } => {
                let u = self.u_fn(grid).expect("closed form");
                let v = *v;
                if v == VProfile::Equilibrium {
                    return Ok(u);
                }
                let map = crate::model::EquilibriumMap::new(iso);
                Ok(Box::new(move |x| {
                    let z = (u(x) + Self::v_profile(v, iso, u(x))).clamp(0.0, 2.0);
                    map.invert(z).unwrap_or(0.0)
                }))
            }
            InitialData::LayerDemo => {
                let (x_min, h) = (grid.x_min, grid.h());
                let map = crate::model::EquilibriumMap::new(iso);
                Ok(Box::new(move |x| {
                    let z = (PI * (x - x_min) / h).sin().clamp(0.0, 1.0);
                    map.invert(z).unwrap_or(0.0)
                }))
            }
            InitialData::CustomCsv { .. } => Err(Error::InvalidParameter(
                "equilibrium references need closed-form initial data".into(),
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::config(format!("initial_data.{name}"), format!("{x} lies outside [0, 1]")))
            }
        };
        let v_ok = |v: &VProfile| match *v {
            VProfile::Constant(c) => unit("v", c),
            VProfile::Equilibrium => Ok(()),
        };
        match self {
            InitialData::Riemann {
                u_left, u_right, v, ..
            } => {
                unit("u_left", *u_left)?;
                unit("u_right", *u_right)?;
                v_ok(v)
            }
            InitialData::Hump { width, height, v, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::config("initial_data.width", format!("must be positive, got {width}")));
                }
                unit("height", *height)?;
                v_ok(v)
            }
            InitialData::LayerDemo => Ok(()),
            InitialData::CustomCsv { path } => {
                if path.is_file() {
                    Ok(())
                } else {
                    Err(Error::config(
                        "initial_data.path",
                        format!("file {} does not exist", path.display()),
                    ))
                }
            }
        }
    }
}

fn read_state_csv(path: &Path, grid: &GridSpec) -> Result<GridState> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let bad = |msg: String| Error::config("initial_data.path", format!("{}: {msg}", path.display()));
    match lines.next() {
        Some(h) if h.trim() == "x,u,v" => {}
        other => return Err(bad(format!("expected header `x,u,v`, got {other:?}"))),
    }
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(bad(format!("row {} has {} columns", i + 1, cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", i + 1)));
        u.push(num(cols[1])?);
        v.push(num(cols[2])?);
    }
    GridState::new(grid, u, v)
}

/// Optional parameter sweeps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweeps {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registry entry to run.
    pub name: String,
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub scheme: SchemeConfig,
    /// Experiment-specific default when absent.
    #[serde(default)]
    pub initial_data: Option<InitialData>,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
    #[serde(default)]
    pub sweeps: Sweeps,
    /// Kružkov constants for `u` and `v`.
    #[serde(default = "default_probes")]
    pub probes: Vec<f64>,
    /// Times at which to dump fields; `0` or a multiple of `dt`.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    /// Seed for randomly generated data.
    #[serde(default)]
    pub seed: u64,
    /// Number of perturbed pairs in the contraction experiment.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_ramp_substeps")]
    pub ramp_substeps: usize,
}

fn default_probes() -> Vec<f64> {
    DEFAULT_PROBES.to_vec()
}
fn default_pairs() -> usize {
    4
}
fn default_ramp_substeps() -> usize {
    16
}

impl ExperimentConfig {
    pub fn initial_data(&self) -> &InitialData {
        self.initial_data
            .as_ref()
            .expect("initial data is resolved by parse_config")
    }

    /// Snapshot times as event indices.
    pub fn snapshot_events(&self) -> Vec<usize> {
        self.snapshots
            .iter()
            .map(|t| (t / self.scheme.dt).round() as usize)
            .collect()
    }

    fn validate(&mut self, base: &Path) -> Result<()> {
        let experiment = experiments::lookup(&self.name).ok_or_else(|| {
            Error::config(
                "name",
                format!(
                    "unknown experiment `{}`; expected one of {}",
                    self.name,
                    experiments::names().join(", ")
                ),
            )
        })?;
        let at = |path: &'static str| move |e: Error| match e {
            Error::Config { .. } => e,
            other => Error::config(path, other.to_string()),
        };
        self.model.flux.validate().map_err(at("model.flux"))?;
        self.model.isotherm.validate().map_err(at("model.isotherm"))?;
        self.grid.validate().map_err(at("grid"))?;
        self.scheme.validate().map_err(at("scheme"))?;

        if self.initial_data.is_none() {
            self.initial_data = Some(experiment.default_data.clone());
        }
        if let Some(InitialData::CustomCsv { path }) = &mut self.initial_data {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        self.initial_data().validate()?;

        for (i, &k) in self.probes.iter().enumerate() {
            if !(0.0..=1.0).contains(&k) {
                return Err(Error::config(format!("probes[{i}]"), format!("{k} lies outside [0, 1]")));
            }
        }
        let dt = self.scheme.dt;
        for (i, &t) in self.snapshots.iter().enumerate() {
            let n = (t / dt).round();
            if !(t >= 0.0 && t <= self.scheme.horizon * (1.0 + 1e-12) && (t - n * dt).abs() <= 1e-9 * dt.max(t)) {
                return Err(Error::config(
                    format!("snapshots[{i}]"),
                    format!("{t} is not an event time in [0, {}] with dt {dt}", self.scheme.horizon),
                ));
            }
        }
        if self.pairs == 0 {
            return Err(Error::config("pairs", "must be positive"));
        }
        if self.ramp_substeps == 0 {
            return Err(Error::config("ramp_substeps", "must be positive"));
        }

        let sweeps = [
            ("mu", &self.sweeps.mu),
            ("h", &self.sweeps.h),
            ("epsilon", &self.sweeps.epsilon),
        ];
        for (key, values) in sweeps {
            let Some(values) = values else { continue };
            if !experiment.sweeps.contains(&key) {
                return Err(Error::config(
                    format!("sweeps.{key}"),
                    format!("not used by experiment `{}`", self.name),
                ));
            }
            if values.is_empty() {
                return Err(Error::config(format!("sweeps.{key}"), "must not be empty"));
            }
            for (i, &x) in values.iter().enumerate() {
                if !(x.is_finite() && x > 0.0) {
                    return Err(Error::config(format!("sweeps.{key}[{i}]"), format!("must be positive, got {x}")));
                }
            }
        }
        if let Some(hs) = &self.sweeps.h {
            let len = self.grid.x_max - self.grid.x_min;
            for (i, &h) in hs.iter().enumerate() {
                let n = (len / h).round();
                if n < 1.0 || (n * h - len).abs() > 1e-9 * len {
                    return Err(Error::config(
                        format!("sweeps.h[{i}]"),
                        format!("{h} does not divide the domain length {len}"),
                    ));
                }
            }
        }
        if let Some(eps) = &self.sweeps.epsilon {
            for (i, &e) in eps.iter().enumerate() {
                if e >= 0.5 * dt {
                    return Err(Error::config(
                        format!("sweeps.epsilon[{i}]"),
                        format!("{e} must be below dt/2 = {}", 0.5 * dt),
                    ));
                }
            }
        }
        (experiment.validate)(self)
    }
}

/// Parses and validates a configuration. Relative file paths resolve
/// against the working directory.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_at(text, Path::new("."))
}

/// As [`parse_config`], resolving relative file paths against `base`.
pub fn parse_config_at(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })?;
    cfg.validate(base)?;
    Ok(cfg)
}

/// Reads a configuration file; relative paths inside it resolve against
/// the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    parse_config_at(&text, base)
}
