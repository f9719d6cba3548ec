use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] npiprobe_core::Error),

    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}:{line}: {message}", .path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("stale artifact {}: recorded sha256 {expected}, found {found}", .path.display())]
    Stale { path: PathBuf, expected: String, found: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: String, source: Box<Error> },

    #[error("missing artifact: {0}")]
    MissingArtifact(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, line: usize, message: impl ToString) -> Error {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            line,
            message: message.to_string(),
        }
    }

    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// Short machine-readable code, used by the CLI exit status and the
    /// HTTP error body.
    pub fn code(&self) -> &'static str {
        use npiprobe_core::Error as C;
        match self {
            Error::Core(C::Format { .. }) | Error::Parse { .. } => "format",
            Error::Core(C::Capability(_)) => "capability",
            Error::Core(C::Argument(_)) | Error::Config(_) => "argument",
            Error::Core(C::UnsupportedTarget(_)) => "unsupported_target",
            Error::Core(C::MissingTensors { .. }) | Error::Core(C::Load(_)) => "load",
            Error::Core(C::Alignment { .. }) => "alignment",
            Error::Core(C::Sentence { .. }) => "sentence",
            Error::Core(C::Conflict(_)) => "conflict",
            Error::Core(C::State(_)) => "state",
            Error::Core(C::Sequencing(_)) => "sequencing",
            Error::Core(C::NotFound(_)) => "not_found",
            Error::Io { .. } => "io",
            Error::Stale { .. } => "stale_artifact",
            Error::Stage { source, .. } => source.code(),
            Error::MissingArtifact(_) => "missing_artifact",
        }
    }
}
