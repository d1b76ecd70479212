//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("amplitude vector has length {got}, but the site dimensions require {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid site dimensions: {0}")]
    BadDims(String),

    #[error("state vector has zero norm")]
    ZeroNorm,

    #[error("site subset must be a nonempty proper subset of the {n_sites} sites")]
    BadSubset { n_sites: usize },

    #[error("epsilon {0} outside [0, 1]")]
    EpsOutOfRange(f64),

    #[error("amplitudes not normalized: |alpha|^2 + |beta|^2 = {0}")]
    NotNormalized(f64),

    #[error("not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("basis index {index} out of range for site dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("generator index {index} out of range for site dimension {dim}")]
    GeneratorOutOfRange { index: usize, dim: usize },

    #[error("operation requires at least two sites")]
    SingleSite,

    #[error("unknown formula name `{0}`")]
    UnknownForm(String),

    #[error("label {label} cannot be obtained from setting {setting}")]
    SettingMismatch { label: String, setting: String },

    #[error("no setting in the plan produces label {0}")]
    InsufficientSettings(String),

    #[error("total dimension {dim} exceeds the limit {limit}")]
    SizeLimit { dim: usize, limit: usize },

    #[error("site {site} has dimension {dim}; shot simulation measures qubit sites only")]
    NonQubitSite { site: usize, dim: usize },

    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
