//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// The input source could not be read at all.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A mandatory CSV header column is absent.
    #[error("schema error: missing mandatory column `{column}`")]
    MissingColumn { column: String },

    /// A text field failed to parse into its domain type.
    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    /// An operation that needs at least one record was given none.
    #[error("empty record stream")]
    EmptyStream,

    /// Inputs violate an operation precondition.
    #[error("bad input: {0}")]
    BadInput(String),

    /// A series has zero variance where variation is required.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// A model parameter is NaN or infinite.
    #[error("non-finite parameter encountered")]
    NonFiniteParams,

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    /// Standardization against a zero denominator.
    #[error("degenerate denominator: delta NEV population is zero")]
    DegenerateDenominator,

    /// The scenario configuration is unusable.
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline stage failed; carries the stage name for diagnostics.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn bad_input(msg: impl Into<String>) -> Self {
        Error::BadInput(msg.into())
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by configuration rather than data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
