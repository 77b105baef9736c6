use std::path::{Path, PathBuf};

use confcal::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] confcal::Error),
    /// Failure while reading a specific input file.
    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        source: confcal::Error,
    },
    /// Malformed configuration file or option value.
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Contract(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 parse, 3 contract, 4 numerical, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) | CliError::Input { source: e, .. } => match e.kind() {
                ErrorKind::Io => 1,
                ErrorKind::Parse => 2,
                ErrorKind::Contract => 3,
                ErrorKind::Numerical => 4,
            },
            CliError::Config(_) => 2,
            CliError::Contract(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
