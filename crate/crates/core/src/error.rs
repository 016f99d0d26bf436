use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("input too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("caption style {0:?} has no tokens")]
    EmptyCaption(&'static str),
    #[error("loss tensor is not a scalar")]
    NotScalarLoss,
    #[error("tensor was not recorded on this tape")]
    DetachedTensor,
    #[error("missing features for utterance {0}")]
    MissingFeature(String),
    #[error("missing embedding for utterance {0}")]
    MissingEmbedding(String),
    #[error("split {0} is empty")]
    EmptySplit(&'static str),
    #[error("EER needs both bonafide and spoof trials")]
    OneClassOnly,
    #[error("score for unknown utterance {0}")]
    UnknownUtt(String),
    #[error("duplicate utterance {0}")]
    DuplicateUtt(String),
    #[error("no score for utterance {0}")]
    MissingScore(String),
    #[error("score sets cover different utterances: {0}")]
    CoverageMismatch(String),
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("need at least {needed} examples, got {got}")]
    TooFewExamples { needed: usize, got: usize },
    #[error("feature length {got} does not match model width {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("generator kind {0} cannot be applied as a fake")]
    WrongKind(&'static str),
    #[error("need at least 2 fake generator families, got {0}")]
    InsufficientFamilies(usize),
}

impl Error {
    /// Stable upper-case identifier, used as the machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::TooShort { .. } => "TOO_SHORT",
            Error::InvalidConfig(_) => "INVALID_CONFIG",
            Error::ShapeMismatch(_) => "SHAPE_MISMATCH",
            Error::NonFinite(_) => "NON_FINITE",
            Error::EmptyCaption(_) => "EMPTY_CAPTION",
            Error::NotScalarLoss => "NOT_SCALAR_LOSS",
            Error::DetachedTensor => "DETACHED_TENSOR",
            Error::MissingFeature(_) => "MISSING_FEATURE",
            Error::MissingEmbedding(_) => "MISSING_EMBEDDING",
            Error::EmptySplit(_) => "EMPTY_SPLIT",
            Error::OneClassOnly => "ONE_CLASS_ONLY",
            Error::UnknownUtt(_) => "UNKNOWN_UTT",
            Error::DuplicateUtt(_) => "DUPLICATE_UTT",
            Error::MissingScore(_) => "MISSING_SCORE",
            Error::CoverageMismatch(_) => "COVERAGE_MISMATCH",
            Error::SingularSystem => "SINGULAR_SYSTEM",
            Error::TooFewExamples { .. } => "TOO_FEW_EXAMPLES",
            Error::DimMismatch { .. } => "DIM_MISMATCH",
            Error::WrongKind(_) => "WRONG_KIND",
            Error::InsufficientFamilies(_) => "INSUFFICIENT_FAMILIES",
        }
    }

    /// True for errors that indicate a broken internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::NotScalarLoss | Error::DetachedTensor)
    }
}

pub type Result<T> = core::result::Result<T, Error>;
