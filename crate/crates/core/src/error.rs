use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("query is empty after normalization")]
    EmptyAfterNormalization,

    #[error("empty corpus: no tokens survive min_count filtering")]
    EmptyCorpus,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },

    #[error("degenerate pair: rank_p == rank_n == {0}")]
    DegeneratePair(usize),

    #[error("degenerate weights: all sample weights are zero")]
    DegenerateWeights,

    #[error("empty sample set")]
    EmptySamples,

    #[error("feature layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("non-finite value in the {0} feature block")]
    NonFiniteFeature(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("non-finite loss in epoch {epoch}, batch {batch} (last finite loss {last_finite})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        last_finite: f64,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
