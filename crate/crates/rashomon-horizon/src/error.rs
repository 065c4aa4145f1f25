//! Crate-wide error type and exit-code mapping for the CLI.

use thiserror::Error;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, parameters, or preconditions supplied by the caller.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed input data; locations are 1-based.
    #[error("parse error at row {row}, column {col}: {reason}")]
    Parse {
        row: usize,
        col: usize,
        reason: String,
    },

    /// A numerical integration produced a non-finite state.
    #[error("integration diverged at step {step}")]
    Diverged { step: usize },

    /// A closed-loop forecast produced a non-finite value.
    #[error("rollout diverged at horizon {horizon}")]
    RolloutDiverged { horizon: usize },

    /// Dimension or length mismatch between arrays.
    #[error("shape error: {0}")]
    Shape(String),

    /// Argument outside the operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series without enough variation to analyze (constant input).
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// A loss-table column with fewer than two finite entries.
    #[error("degenerate loss column at horizon {0}")]
    DegenerateColumn(usize),

    /// Not enough usable data for the requested estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Requested combination is not implemented.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Linear system could not be factorized.
    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    /// A pipeline stage failed; partial artifacts are preserved.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    /// An expected artifact is absent from a run directory.
    #[error("missing artifact '{path}': rerun the '{stage}' stage")]
    MissingArtifact { path: String, stage: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code for the CLI: 2 config, 4 missing artifacts, 3 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::MissingArtifact { .. } => 4,
            Error::Stage { source, .. } => source.exit_code().max(3),
            _ => 3,
        }
    }

    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
