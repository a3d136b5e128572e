//! C ABI for relaxlab.
//!
//! Every fallible call returns a [`RelaxlabStatus`]. On failure the message
//! is kept per thread and read with [`relaxlab_last_error`]. Handles are
//! opaque; each `*_new`/`*_load` has a matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use relaxlab::sources::{relax_inner_solve, InnerOdeProblem};
use relaxlab::splitting::{run, RunLog};
use relaxlab::{
    load_config, run_experiment, Error, ExperimentConfig, GridState, IsothermSpec, RunOptions,
    Strength,
};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bad config text or a failed config check.
    Config = 3,
    Io = 4,
    /// The numerics refused the input (domain, CFL, bracketing, ...).
    Numerics = 5,
    /// The run finished but at least one diagnostic check failed.
    ChecksFailed = 6,
    Panic = 7,
}

/// Parsed experiment config.
pub struct RelaxlabConfig {
    inner: ExperimentConfig,
    name: CString,
}

impl RelaxlabConfig {
    fn boxed(inner: ExperimentConfig) -> *mut Self {
        let name = CString::new(inner.name.clone()).unwrap_or_default();
        Box::into_raw(Box::new(Self { inner, name }))
    }
}

/// One split-scheme run: config, current state and the log of the last run.
pub struct RelaxlabSimulation {
    cfg: ExperimentConfig,
    state: GridState,
    log: Option<RunLog>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn classify(err: &Error) -> RelaxlabStatus {
    match err {
        Error::Config { .. } | Error::Json(_) => RelaxlabStatus::Config,
        Error::Io(_) => RelaxlabStatus::Io,
        Error::Context { source, .. } => classify(source),
        Error::InvalidParameter(_) | Error::LengthMismatch { .. } | Error::GridMismatch => {
            RelaxlabStatus::InvalidArgument
        }
        _ => RelaxlabStatus::Numerics,
    }
}

fn guard<F: FnOnce() -> Result<(), (RelaxlabStatus, String)>>(f: F) -> RelaxlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RelaxlabStatus::Ok,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside relaxlab".into());
            RelaxlabStatus::Panic
        }
    }
}

fn lift<T>(r: relaxlab::Result<T>) -> Result<T, (RelaxlabStatus, String)> {
    r.map_err(|e| (classify(&e), e.to_string()))
}

fn null(what: &str) -> (RelaxlabStatus, String) {
    (RelaxlabStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RelaxlabStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RelaxlabStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (RelaxlabStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (RelaxlabStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn relaxlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn relaxlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses config JSON. Relative paths inside it resolve against `base_dir`,
/// or the working directory when `base_dir` is NULL.
///
/// # Safety
/// `json` and `base_dir` must be NULL or NUL-terminated; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_config_parse(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut RelaxlabConfig,
) -> RelaxlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let base = if base_dir.is_null() {
            PathBuf::from(".")
        } else {
            PathBuf::from(str_arg(base_dir, "base_dir")?)
        };
        let inner = lift(relaxlab::config::parse_config_at(text, &base))?;
        *out = RelaxlabConfig::boxed(inner);
        Ok(())
    })
}

/// Reads and parses a config file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_config_load(
    path: *const c_char,
    out: *mut *mut RelaxlabConfig,
) -> RelaxlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lift(load_config(Path::new(str_arg(path, "path")?)))?;
        *out = RelaxlabConfig::boxed(inner);
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_config_free(cfg: *mut RelaxlabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Experiment name; valid while `cfg` lives.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_config_name(cfg: *const RelaxlabConfig) -> *const c_char {
    cfg.as_ref().map_or(ptr::null(), |c| c.name.as_ptr())
}

/// Runs the configured experiment and writes its outputs to `out_dir`.
/// `threads == 0` uses the default pool. Returns `ChecksFailed` when the
/// outputs were written but a diagnostic failed.
///
/// # Safety
/// `cfg` must be a live handle and `out_dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_run_experiment(
    cfg: *const RelaxlabConfig,
    out_dir: *const c_char,
    threads: usize,
) -> RelaxlabStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let opts = RunOptions {
            out_dir: PathBuf::from(str_arg(out_dir, "out_dir")?),
            parallel: (threads > 0).then_some(threads),
        };
        let summary = lift(run_experiment(&cfg.inner, &opts))?;
        if summary.all_pass() {
            Ok(())
        } else {
            let failed: Vec<&str> = summary
                .checks
                .iter()
                .filter(|(_, c)| !c.pass)
                .map(|(k, _)| k.as_str())
                .collect();
            Err((RelaxlabStatus::ChecksFailed, format!("failed checks: {}", failed.join(", "))))
        }
    })
}

/// Builds a simulation from the config's model, grid, scheme and initial
/// data. The config handle may be freed afterwards.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_simulation_new(
    cfg: *const RelaxlabConfig,
    out: *mut *mut RelaxlabSimulation,
) -> RelaxlabStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = cfg.inner.clone();
        let state = lift(c.initial_data().build(&c.grid, &c.model))?;
        *out = Box::into_raw(Box::new(RelaxlabSimulation {
            cfg: c,
            state,
            log: None,
        }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_simulation_free(sim: *mut RelaxlabSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of fine cells.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_simulation_len(sim: *const RelaxlabSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.state.u.len())
}

/// Copies the current `u` and `v` into caller buffers of length `len`.
/// Either buffer may be NULL to skip it.
///
/// # Safety
/// Non-null buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_simulation_get_fields(
    sim: *const RelaxlabSimulation,
    u: *mut f64,
    v: *mut f64,
    len: usize,
) -> RelaxlabStatus {
    guard(|| {
        let s = handle(sim, "sim")?;
        check_len(s, len)?;
        if !u.is_null() {
            ptr::copy_nonoverlapping(s.state.u.as_ptr(), u, len);
        }
        if !v.is_null() {
            ptr::copy_nonoverlapping(s.state.v.as_ptr(), v, len);
        }
        Ok(())
    })
}

/// Replaces the state. Values must lie in [0, 1].
///
/// # Safety
/// Both buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_simulation_set_fields(
    sim: *mut RelaxlabSimulation,
    u: *const f64,
    v: *const f64,
    len: usize,
) -> RelaxlabStatus {
    guard(|| {
        let s = handle_mut(sim, "sim")?;
        check_len(s, len)?;
        if u.is_null() || v.is_null() {
            return Err(null("field buffer"));
        }
        let u = std::slice::from_raw_parts(u, len).to_vec();
        let v = std::slice::from_raw_parts(v, len).to_vec();
        s.state = lift(GridState::new(&s.cfg.grid, u, v))?;
        s.log = None;
        Ok(())
    })
}

fn check_len(s: &RelaxlabSimulation, len: usize) -> Result<(), (RelaxlabStatus, String)> {
    if len == s.state.u.len() {
        Ok(())
    } else {
        Err((
            RelaxlabStatus::InvalidArgument,
            format!("buffer length {len}, grid has {} cells", s.state.u.len()),
        ))
    }
}

/// Advances the state by the scheme's horizon.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_simulation_run(sim: *mut RelaxlabSimulation) -> RelaxlabStatus {
    guard(|| {
        let s = handle_mut(sim, "sim")?;
        let (state, log) = lift(run(&s.state, &s.cfg.model, &s.cfg.grid, &s.cfg.scheme))?;
        s.state = state;
        s.log = Some(log);
        Ok(())
    })
}

/// Entropy residual maxima of the last run: convection sub-steps and
/// events. A positive value is a violated inequality.
///
/// # Safety
/// `sim` must be a live handle; outputs may be NULL.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_simulation_residuals(
    sim: *const RelaxlabSimulation,
    convect: *mut f64,
    event: *mut f64,
) -> RelaxlabStatus {
    guard(|| {
        let s = handle(sim, "sim")?;
        let log = s.log.as_ref().ok_or_else(|| {
            (RelaxlabStatus::InvalidArgument, "simulation has not been run".to_string())
        })?;
        if let Some(c) = convect.as_mut() {
            *c = log.max_convect_residual();
        }
        if let Some(e) = event.as_mut() {
            *e = log.max_event_residual();
        }
        Ok(())
    })
}

/// Langmuir isotherm `A(u) = (1 + β) u / (1 + β u)`; `β = 0` is linear.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_isotherm_value(beta: f64, u: f64, out: *mut f64) -> RelaxlabStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lift(langmuir(beta)?.eval(u))?;
        Ok(())
    })
}

/// One pointwise relaxation layer with `rate = μΔt`; a negative `rate`
/// means `μ = ∞`.
///
/// # Safety
/// `u1` and `v1` must be writable.
#[no_mangle]
pub unsafe extern "C" fn relaxlab_relax_inner(
    beta: f64,
    u0: f64,
    v0: f64,
    rate: f64,
    u1: *mut f64,
    v1: *mut f64,
) -> RelaxlabStatus {
    guard(|| {
        if u1.is_null() || v1.is_null() {
            return Err(null("output"));
        }
        let iso = langmuir(beta)?;
        let mu = if rate < 0.0 {
            Strength::Infinite
        } else {
            Strength::Finite(rate)
        };
        let prob = InnerOdeProblem::new(u0, v0, rate.max(0.0));
        let (a, b) = lift(relax_inner_solve(&iso, &prob, mu))?;
        *u1 = a;
        *v1 = b;
        Ok(())
    })
}

fn langmuir(beta: f64) -> Result<IsothermSpec, (RelaxlabStatus, String)> {
    let iso = IsothermSpec::Langmuir { beta };
    lift(iso.validate())?;
    Ok(iso)
}
