use std::fmt;

use scatrel::ScatError;

/// CLI failure, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration; `line` is 1-based in the config file, 0 when the
    /// problem is not inside the file.
    Config { line: usize, message: String },
    /// An invariant check failed; the payload lists the failing identifiers.
    Invariant(Vec<String>),
    Dynamics(ScatError),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Config { .. } | CliError::Io(_) => 2,
            CliError::Dynamics(_) => 3,
        }
    }
}

impl From<ScatError> for CliError {
    fn from(e: ScatError) -> Self {
        match e {
            ScatError::InvalidConfig(_) | ScatError::DimensionMismatch { .. } => {
                CliError::Config { line: 1, message: e.to_string() }
            }
            other => CliError::Dynamics(other),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { line: 0, message } => write!(f, "config error: {message}"),
            CliError::Config { line, message } => write!(f, "config error at line {line}: {message}"),
            CliError::Invariant(ids) => write!(f, "invariant failure: {}", ids.join(", ")),
            CliError::Dynamics(e) => write!(f, "dynamics error: {e}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}
