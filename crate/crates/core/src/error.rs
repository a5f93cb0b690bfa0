use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A line of an input file could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The input parsed but does not describe a usable year x age table.
    #[error("structure: {0}")]
    Structure(String),

    /// A value lies outside its mathematical domain (negative count, q > 1, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// A caller supplied an invalid argument (out-of-range L, empty pool, ...).
    #[error("argument: {0}")]
    Argument(String),

    /// A numerical routine failed (non-convergence, non-finite result).
    #[error("numeric: {0}")]
    Numeric(String),

    /// Run configuration is incomplete or inconsistent; lists every problem.
    #[error("config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
