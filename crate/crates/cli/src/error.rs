use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid config field `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error(transparent)]
    Core(#[from] cutstokes_core::Error),

    #[error("{0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Self::Invalid { field: field.to_string(), reason: reason.into() }
    }

    /// Short machine-readable kind.
    pub fn kind(&self) -> &'static str {
        use cutstokes_core::Error as E;
        match self {
            Self::Read { .. } | Self::Write { .. } => "io",
            Self::Json(_) | Self::Invalid { .. } => "config",
            Self::Pool(_) => "runtime",
            Self::Core(e) => match e {
                E::InvalidParameter { .. } | E::Config(_) | E::Gauge(_) => "config",
                E::DegenerateBox(_) => "mesh",
                E::EmptyPhysicalMesh { .. } => "empty_physical_mesh",
                E::ContainmentViolation { .. } => "containment",
                E::Singular(_) | E::SolverNotConverged { .. } => "solver",
                E::ZeroNormalizer { .. } => "normalization",
            },
        }
    }

    pub fn field(&self) -> Option<String> {
        match self {
            Self::Invalid { field, .. } => Some(field.clone()),
            Self::Core(cutstokes_core::Error::InvalidParameter { name, .. }) => Some(name.to_string()),
            _ => None,
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord { kind: self.kind(), field: self.field(), message: self.to_string() }
    }
}

/// Contents of `error.json`.
#[derive(Clone, Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub field: Option<String>,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, CliError>;
