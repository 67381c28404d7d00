//! Error type shared by every module of the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A model failed its construction invariants (row sums, discount range, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A caller-supplied argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Estimators require at least one transition.
    #[error("transition dataset is empty")]
    EmptyDataset,

    /// An estimator was applied to the wrong state kind.
    #[error("state kind mismatch: expected {expected} states, got {got}")]
    StateKindMismatch {
        expected: &'static str,
        got: &'static str,
    },

    /// A least-squares or LSTD system is numerically rank deficient.
    #[error("rank-deficient system: numerical rank {actual}, required {required}")]
    RankDeficient { required: usize, actual: usize },

    /// The fitted dynamics are too unstable for the plug-in value solve.
    #[error("plug-in dynamics unstable: discounted spectral radius {radius:.6} >= 1")]
    PlugInUnstable { radius: f64 },

    /// An iterative solve hit its iteration cap.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// A product state space would exceed the materialization cap.
    #[error("product state space has {size} states, exceeding the cap of {cap}")]
    SizeGuardExceeded { size: u128, cap: u128 },

    /// A direct solve or post-condition check failed unexpectedly.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file, annotated with path and 1-based line number.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
