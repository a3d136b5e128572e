use thiserror::Error;

/// Errors raised by the numerical core and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid mismatch between the two states")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("CFL violation: step {step} exceeds the admissible {limit}")]
    Cfl { step: f64, limit: f64 },

    #[error("bisection bracket failure: g({lo}) = {g_lo}, g({hi}) = {g_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("event fired off schedule at t = {t} (dt = {dt})")]
    OffSchedule { t: f64, dt: f64 },

    #[error("instability detected: value {value} at cell {cell}, t = {t}")]
    Unstable { value: f64, cell: usize, t: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("missing log data: {0}")]
    MissingLog(&'static str),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
