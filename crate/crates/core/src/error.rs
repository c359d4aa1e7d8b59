use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value produced by layer {layer} ({kind})")]
    NonFinite { layer: String, kind: &'static str },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e}, diagonal range [{diag_min:.3e}, {diag_max:.3e}])")]
    EigenNonConvergence {
        sweeps: usize,
        off_norm: f64,
        diag_min: f64,
        diag_max: f64,
    },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:.3e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },

    #[error("negative eigenvalue {value:.3e} below tolerance {tolerance:.3e}")]
    NegativeEigenvalue { value: f64, tolerance: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("unknown search space '{0}'")]
    UnknownSpace(String),

    #[error("unknown metric '{0}'")]
    UnknownMetric(String),

    #[error("invalid genotype: {0}")]
    Genotype(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input value {value} at position {index} lies outside [0, 1]")]
    OutOfUnitRange { index: usize, value: f64 },

    #[error("training diverged at step {step} (loss {loss:.3e})")]
    Divergence { step: usize, loss: f64 },

    #[error("feasible-sample starvation after {rejections} consecutive rejections (mac cap {mac_cap})")]
    Starvation { rejections: usize, mac_cap: u64 },

    #[error("space of cardinality {cardinality} exceeds enumeration cap {cap}")]
    EnumerationCap { cardinality: u128, cap: u128 },

    #[error("rank correlation undefined: {0}")]
    UndefinedTau(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True for failures caused by arithmetic rather than by bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::EigenNonConvergence { .. }
                | Error::NegativeEigenvalue { .. }
                | Error::Singular(_)
                | Error::Divergence { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
