use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by solvers, statistics, scans, and CSV handling.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation argument violated its documented range.
    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    /// An evaluation was requested outside the supported domain
    /// (e.g. a lag beyond the horizon, or a horizon that would overflow).
    #[error("domain error: {0}")]
    Domain(String),

    /// A series truncation could not reach the requested tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// The drift returned a non-finite value, so integration stopped.
    #[error("non-finite drift value at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    /// The linear response has a pole: f3 and f4 vanish simultaneously.
    #[error("singular gain: f3 = f4 = 0 at the requested parameters")]
    SingularGain,

    /// No path satisfied the passage condition inside the horizon.
    #[error("all {n_paths} paths censored before the horizon")]
    AllCensored { n_paths: usize },

    /// A Monte Carlo realization failed; the index identifies which one.
    #[error("path {path} failed: {source}")]
    PathFailure {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A CSV document did not match the expected schema.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
