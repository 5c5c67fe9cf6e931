use qbd_core::QbdError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] QbdError),
    #[error("{failed} of {total} checks failed")]
    Acceptance { failed: usize, total: usize },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for bad input, 2 for numerical failure, 3 for failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) | Self::Io(_) => 1,
            Self::Numerical(_) => 2,
            Self::Acceptance { .. } => 3,
        }
    }
}
