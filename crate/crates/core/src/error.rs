use thiserror::Error;

/// Errors raised by the numerical routines and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("query point ({re}, {im}) lies outside the tabulated grid")]
    Domain { re: f64, im: f64 },

    #[error("growth condition violated: no truncation radius below {cap} (theta = {theta}, slack = {slack})")]
    GrowthCondition { theta: f64, slack: f64, cap: f64 },

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("integration box half-width {half_width} is smaller than the truncation radius {required}")]
    Truncation { half_width: f64, required: f64 },

    #[error("moment matrix is not positive definite (pivot {pivot})")]
    IllConditionedMoments { pivot: usize },

    #[error("scaled moment matrix condition number {condition:.3e} exceeds {limit:.1e}")]
    Conditioning { condition: f64, limit: f64 },

    #[error("obstacle solver did not converge after {iterations} sweeps (last updates: {history:?})")]
    NonConvergence { iterations: usize, history: Vec<f64> },

    #[error("could not bracket the mass target {target} for c in [{lo}, {hi}]")]
    MassMatching { target: f64, lo: f64, hi: f64 },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("internal inconsistency: {0}")]
    Inconsistency(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Argument(_) | Error::Json(_) => 2,
            Error::Io(_) => 2,
            _ => 3,
        }
    }
}

pub(crate) fn arg(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
