use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`])
/// that the command-line front end prints alongside the message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    // graph data
    #[error("node {node}: expected {expected} features, found {found}")]
    FeatureDimMismatch {
        node: usize,
        expected: usize,
        found: usize,
    },
    #[error("node ids must be dense 0..{count}; found id {id} at position {position}")]
    NonDenseIds {
        id: usize,
        position: usize,
        count: usize,
    },
    #[error("edge ({0}, {1}) references a node that does not exist")]
    DanglingEdge(usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("node {node}: project index {project} out of range ({count} projects)")]
    ProjectOutOfRange {
        node: usize,
        project: usize,
        count: usize,
    },
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("cross-validation needs at least 2 projects, dataset has {0}")]
    TooFewProjects(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // encodings
    #[error("label vocabulary is empty")]
    EmptyVocabulary,
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("invalid generic grouping: {0}")]
    InvalidGrouping(String),
    #[error("embedding table has no vector for label {0:?}")]
    MissingLabel(String),
    #[error("vector for {label:?} has length {found}, expected {expected}")]
    VectorLengthMismatch {
        label: String,
        expected: usize,
        found: usize,
    },
    #[error("zero vector: {0}")]
    ZeroVector(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("compaction target {target} outside 1..={dim}")]
    CompactRange { target: usize, dim: usize },
    #[error("embedding dimension {dim} too small: need at least {needed}")]
    DimTooSmall { dim: usize, needed: usize },

    // embeddings endpoint
    #[error("embeddings request failed: {0}")]
    Http(String),
    #[error("embeddings endpoint returned status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("embeddings endpoint returned {found} vectors for {expected} inputs")]
    CountMismatch { expected: usize, found: usize },
    #[error("malformed embeddings response: {0}")]
    BadResponse(String),

    // model / training
    #[error("model layers do not chain: {0}")]
    ShapeMismatch(String),
    #[error("forward cache does not match model or dataset: {0}")]
    CacheMismatch(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("class index {class} out of range for {classes} classes")]
    InvalidClass { class: usize, classes: usize },

    // statistics
    #[error("sample size {n} outside {min}..={max}")]
    SampleSize { n: usize, min: usize, max: usize },
    #[error("zero variance: {0}")]
    ZeroVariance(String),
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("vocabulary mismatch between reports: {0}")]
    VocabularyMismatch(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),

    // context wrappers
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("encoding {name:?}: {source}")]
    Encoding {
        name: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable identifier for scripts consuming CLI diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Json(_) => "E_JSON",
            Error::Io(_) => "E_IO",
            Error::Csv(_) => "E_CSV",
            Error::FeatureDimMismatch { .. } => "E_FEATURE_DIM",
            Error::NonDenseIds { .. } => "E_NODE_IDS",
            Error::DanglingEdge(..) => "E_DANGLING_EDGE",
            Error::SelfLoop(_) => "E_SELF_LOOP",
            Error::DuplicateEdge(..) => "E_DUPLICATE_EDGE",
            Error::UnknownLabel(_) => "E_UNKNOWN_LABEL",
            Error::ProjectOutOfRange { .. } => "E_PROJECT_RANGE",
            Error::UnknownNode(_) => "E_UNKNOWN_NODE",
            Error::TooFewProjects(_) => "E_TOO_FEW_PROJECTS",
            Error::InvalidConfig(_) => "E_CONFIG",
            Error::EmptyVocabulary => "E_EMPTY_VOCAB",
            Error::DuplicateLabel(_) => "E_DUPLICATE_LABEL",
            Error::InvalidGrouping(_) => "E_GROUPING",
            Error::MissingLabel(_) => "E_MISSING_LABEL",
            Error::VectorLengthMismatch { .. } => "E_VECTOR_LENGTH",
            Error::ZeroVector(_) => "E_ZERO_VECTOR",
            Error::NonFinite(_) => "E_NON_FINITE",
            Error::DimensionMismatch { .. } => "E_DIM_MISMATCH",
            Error::CompactRange { .. } => "E_COMPACT_RANGE",
            Error::DimTooSmall { .. } => "E_DIM_TOO_SMALL",
            Error::Http(_) => "E_HTTP",
            Error::HttpStatus { .. } => "E_HTTP_STATUS",
            Error::CountMismatch { .. } => "E_COUNT_MISMATCH",
            Error::BadResponse(_) => "E_BAD_RESPONSE",
            Error::ShapeMismatch(_) => "E_SHAPE",
            Error::CacheMismatch(_) => "E_CACHE_MISMATCH",
            Error::EmptyTrainSet => "E_EMPTY_TRAIN",
            Error::EmptyTestSet => "E_EMPTY_TEST",
            Error::Divergence { .. } => "E_DIVERGENCE",
            Error::InvalidClass { .. } => "E_INVALID_CLASS",
            Error::SampleSize { .. } => "E_SAMPLE_SIZE",
            Error::ZeroVariance(_) => "E_ZERO_VARIANCE",
            Error::AllZeroDifferences => "E_ALL_ZERO_DIFF",
            Error::LengthMismatch(..) => "E_LENGTH_MISMATCH",
            Error::VocabularyMismatch(_) => "E_VOCAB_MISMATCH",
            Error::Degenerate(_) => "E_DEGENERATE",
            Error::Fold { source, .. } | Error::Encoding { source, .. } => source.code(),
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Error {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_encoding(self, name: &str) -> Error {
        Error::Encoding {
            name: name.to_string(),
            source: Box::new(self),
        }
    }
}
