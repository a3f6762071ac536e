use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value lies outside the domain of an operation (grey level outside
    /// `[0, M)`, negative scalar, invalid scale parameters).
    #[error("domain error: {0}")]
    Domain(String),

    /// The arguments are well-formed values but cannot be combined
    /// (empty region, channel mismatch, template larger than the image).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file was read but its content is not something we support.
    #[error("format error ({format}): {message}")]
    Format {
        format: &'static str,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn format(format: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            format,
            message: msg.into(),
        }
    }
}
