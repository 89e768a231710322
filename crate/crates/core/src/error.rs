use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("index out of range: {what} {index} (len {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("knowledge bases differ in shape: {left_entities}x{left_questions} vs {right_entities}x{right_questions}")]
    DimensionMismatch {
        left_entities: usize,
        left_questions: usize,
        right_entities: usize,
        right_questions: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(usize),

    #[error("question {0} was already asked in this episode")]
    DuplicateQuestion(usize),

    #[error("every question has already been asked")]
    NoQuestionsLeft,

    #[error("cannot retract a {0:?} response that was never recorded")]
    NothingToRetract(crate::kb::Response),

    #[error("indicator matrix has no known entries")]
    EmptyIndicator,

    #[error("knowledge base has no entities")]
    NoEntities,
}

pub type Result<T> = core::result::Result<T, Error>;
