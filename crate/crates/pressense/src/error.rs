use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] pressense_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{source_name}:{line}: {message}")]
    Parse { source_name: String, line: usize, message: String },
    #[error("{source_name}: unsupported format version {found} (this build reads version {expected})")]
    Version { source_name: String, found: u64, expected: u32 },
    #[error("{0}")]
    Data(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the CLI: 2 invalid arguments, 3 data or parse
    /// errors, 4 training divergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Core(pressense_core::Error::InvalidArgument(_)) => 2,
            Error::Core(pressense_core::Error::TrainingDiverged { .. }) => 4,
            _ => 3,
        }
    }
}
