use thiserror::Error;

/// Failure modes shared by the whole crate.
///
/// Every fallible operation distinguishes bad configuration (rates, node
/// counts, model ids), structurally invalid data (length mismatches, unsorted
/// streams, out-of-range values), inputs on which the requested quantity is
/// mathematically undefined, and plain I/O trouble.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// Short machine-readable tag used in error records printed by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Input(_) => "input",
            Error::Degenerate(_) => "degenerate",
            Error::Io(_) => "io",
        }
    }

    /// Process exit status for the CLI: 2 for anything wrong with the request
    /// or its data, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}
