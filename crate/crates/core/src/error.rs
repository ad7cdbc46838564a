use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),
    #[error("training diverged at step {step}: {reason}")]
    TrainingDiverged { step: usize, reason: String },
    #[error("session error: {0}")]
    Session(String),
    #[error("incomplete session: {0}")]
    IncompleteSession(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
