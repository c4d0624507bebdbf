use crate::vocab::ConceptId;

/// Errors shared across the pipeline stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cycle detected in is-a edges at {child} -> {parent}")]
    Cycle { child: ConceptId, parent: ConceptId },

    #[error("root concept {0} does not appear in the edge list")]
    RootMissing(ConceptId),

    #[error("unknown concept id {0}")]
    UnknownConcept(ConceptId),

    #[error("concepts {0} and {1} share no common ancestor")]
    NoCommonAncestor(ConceptId, ConceptId),

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("corpus yields no training pairs")]
    NoTrainingPairs,

    #[error("co-occurrence matrix has no nonzero entries")]
    EmptyMatrix,

    #[error("embedding row {row} has zero norm")]
    ZeroNormRow { row: usize },

    #[error("vocabulary too small: need at least {need} concepts, have {have}")]
    VocabularyTooSmall { need: usize, have: usize },

    #[error("non-finite {what} at epoch {epoch}")]
    NonFinite { what: &'static str, epoch: usize },

    #[error("invalid config: {field}: {message}")]
    InvalidConfig { field: &'static str, message: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("missing score cells: {0}")]
    MissingCells(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field,
            message: message.into(),
        }
    }
}
