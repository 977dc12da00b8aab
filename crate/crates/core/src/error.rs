use alloc::string::String;

/// Errors raised anywhere in the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("input text is empty")]
    EmptyText,
    #[error("token id {0} is not in the vocabulary")]
    UnknownId(u32),
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("training diverged at epoch {epoch}, step {step}")]
    Divergence { epoch: usize, step: usize },
    #[error("backward called without a recorded forward pass")]
    State,
    #[error("position {0} holds a special token")]
    IllegalPosition(usize),
    #[error("no attackable position in the sequence")]
    NoCandidate,
    #[error("sequence would exceed the model maximum length {0}")]
    LengthExceeded(usize),
    #[error("sequence too short for deletion")]
    TooShort,
    #[error("input is not correctly classified by the victim")]
    NotCorrectlyClassified,
    #[error("sequence contains only special tokens")]
    DegenerateInput,
    #[error("instance too large for exhaustive search: {0}")]
    OracleTooExpensive(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
