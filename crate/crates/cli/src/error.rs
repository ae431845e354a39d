use std::fmt;

use ttscore::ErrorKind;

/// A failed command, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(ttscore::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Validation => 3,
                ErrorKind::Io => 4,
                ErrorKind::Numeric => 5,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<ttscore::Error> for CliError {
    fn from(e: ttscore::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_error(path: &std::path::Path, source: std::io::Error) -> CliError {
    CliError::Core(ttscore::Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
