use std::path::PathBuf;

use crate::spectral::NormTriple;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field spaces differ (n_max {left} vs {right})")]
    SpaceMismatch { left: usize, right: usize },

    #[error("coefficients violate Hermitian symmetry at mode ({k1}, {k2})")]
    NotHermitian { k1: i32, k2: i32 },

    #[error("noise vectors violate assumption (A.1): K_c = {k_c} must be < 1")]
    NoiseTooStrong { k_c: f64 },

    #[error("moment exponent p = {p} outside admissible range [1, 1 + 1/K_c^2) = [1, {bound:.2})")]
    InadmissibleMoment { p: f64, bound: f64 },

    #[error("integrator blowup at t = {t}: |u|_H = {}, ||u||_V^2 = {}", .last.h, .last.v_sq)]
    Blowup {
        t: f64,
        last: NormTriple,
        partial: Box<crate::integrator::TrajectoryRecord>,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
