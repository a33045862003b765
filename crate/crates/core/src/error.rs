use thiserror::Error;

/// Errors raised by the simulator and metrology routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mesh too coarse: {given} elements given, at least {required} needed to resolve n={n}")]
    MeshTooCoarse {
        given: usize,
        required: usize,
        n: usize,
    },

    #[error("mode not resolved (n={n}); increase k or mesh density")]
    ModeNotResolved { n: usize },

    #[error("eigensolver failed: {reason} (max residual {max_residual:.3e})")]
    EigenSolve { reason: String, max_residual: f64 },

    #[error("standing-wave component too large (ratio {ratio:.3e})")]
    StandingWaveTooLarge { ratio: f64 },

    #[error("electrode sectors overlap: {0}")]
    OverlappingSectors(String),

    #[error("numerical divergence at t = {last_valid_time:.6e} s")]
    Divergence { last_valid_time: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("parse error in {source_name} at row {row}, column {col}: {reason}")]
    Parse {
        source_name: String,
        row: usize,
        col: usize,
        reason: String,
    },

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },

    #[error("height map must be leveled before computing areal parameters")]
    NotLeveled,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
