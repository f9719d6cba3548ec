use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised anywhere in the probing pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("unsupported target `{0}`: must encode to exactly one token")]
    UnsupportedTarget(String),

    #[error("load error: missing tensors [{}]", .missing.join(", "))]
    MissingTensors { missing: Vec<String> },

    #[error("load error: {0}")]
    Load(String),

    #[error("alignment error: pattern ids only in a: {only_in_a:?}; only in b: {only_in_b:?}")]
    Alignment {
        only_in_a: Vec<u64>,
        only_in_b: Vec<u64>,
    },

    #[error("sentence {id}: {source}")]
    Sentence { id: u64, source: Box<Error> },

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("state error: {0}")]
    State(String),

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("not found: {0}")]
    NotFound(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: msg.into(),
        }
    }

    /// Short machine-readable code, used by the HTTP layer.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Capability(_) => "capability",
            Error::Argument(_) => "argument",
            Error::UnsupportedTarget(_) => "unsupported_target",
            Error::MissingTensors { .. } | Error::Load(_) => "load",
            Error::Alignment { .. } => "alignment",
            Error::Sentence { .. } => "sentence",
            Error::Conflict(_) => "conflict",
            Error::State(_) => "state",
            Error::Sequencing(_) => "sequencing",
            Error::NotFound(_) => "not_found",
        }
    }
}
