//! Error taxonomy shared by the library and the `tuner` CLI.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across dataset I/O, learning, and experiment runs.
#[derive(Debug)]
pub enum Error {
    /// A file or header does not have the promised shape (missing column, bad manifest).
    Schema(String),
    /// A cell or field failed to parse.
    Parse(String),
    /// Fewer rows or samples than the operation needs.
    InsufficientData(String),
    /// Caller-supplied parameters are invalid or inconsistent.
    Config(String),
    /// The measurement budget cannot cover even one sampling round.
    Budget(String),
    /// A metric or statistic is undefined on this input (flat data, zero variance).
    Undefined(String),
    /// Numeric failure: a degenerate fit or a kernel that stays non-positive-definite.
    Numeric(String),
    /// A configuration or environment was not found where it was promised.
    Lookup(String),
    /// Underlying file-system failure.
    Io(std::io::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration mistakes the user can
    /// fix on the command line, 3 for problems with the data itself.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Budget(_) => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Schema(msg) => write!(f, "schema error: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::InsufficientData(msg) => write!(f, "insufficient data: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Budget(msg) => write!(f, "budget error: {msg}"),
            Error::Undefined(msg) => write!(f, "undefined result: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Lookup(msg) => write!(f, "lookup error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_config_from_data_problems() {
        assert_eq!(Error::Config("bad lives".into()).exit_code(), 2);
        assert_eq!(Error::Budget("too small".into()).exit_code(), 2);
        assert_eq!(Error::Schema("no perf column".into()).exit_code(), 3);
        assert_eq!(Error::Parse("row 3".into()).exit_code(), 3);
        assert_eq!(Error::InsufficientData("1 row".into()).exit_code(), 3);
    }

    #[test]
    fn display_is_prefixed_by_kind() {
        let msg = Error::Undefined("flat dataset".into()).to_string();
        assert!(msg.contains("undefined result"));
        assert!(msg.contains("flat dataset"));
    }
}
