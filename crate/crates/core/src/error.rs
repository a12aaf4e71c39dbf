use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    /// Malformed LibSVM input.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A label token that does not read as a number.
    #[error("label {0:?} is not numeric")]
    NonNumericLabel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A class listed in the label dictionary has no samples.
    #[error("class {class} (label {label:?}) has no samples")]
    DegenerateClass { class: usize, label: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported model format version {0:?}")]
    Version(String),

    #[error("model load error in section `{section}`: {message}")]
    Load { section: String, message: String },

    #[error("model invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn load(section: &str, message: impl Into<String>) -> Self {
        Error::Load {
            section: section.to_string(),
            message: message.into(),
        }
    }
}
