use std::path::PathBuf;

use crate::precoding::PrecoderKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration value violates an invariant. `field` names the key.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse config {path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("unknown preset `{0}` (see `list-presets`)")]
    UnknownPreset(String),

    #[error("degenerate precoder: matrix has zero Frobenius norm")]
    DegeneratePrecoder,

    #[error("ZF singular channel: Gram condition number {condition:.3e} exceeds {limit:.0e}")]
    ZfSingular { condition: f64, limit: f64 },

    #[error("{kind} regularized Gram matrix is not positive definite")]
    NotPositiveDefinite { kind: PrecoderKind },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("cannot synthesize a channel for a link in outage")]
    OutageLink,

    #[error("link stayed in outage after {attempts} condition draws at {distance_m} m")]
    PersistentOutage { attempts: usize, distance_m: f64 },

    #[error("empirical distribution needs at least one sample")]
    EmptySamples,

    #[error("refusing to overwrite {0} (pass --force)")]
    WouldOverwrite(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the user's configuration rather than by the
    /// simulation itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::ConfigParse { .. } | Error::UnknownPreset(_)
        )
    }
}
