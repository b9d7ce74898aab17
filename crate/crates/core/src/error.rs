use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The CLI maps `Domain`, `Usage`, `Config` and `Io` to exit status 1 and
/// `Parse` to exit status 2.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain of a loss, model or parameter set.
    #[error("domain error: {0}")]
    Domain(String),
    /// An operation was called with arguments violating its preconditions.
    #[error("usage error: {0}")]
    Usage(String),
    /// A configuration (model/loss spec, fit or simulation config) is invalid.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed input file.
    #[error("parse error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn parse(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// Process exit status the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
