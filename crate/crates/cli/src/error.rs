use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid dataset: {0}")]
    Schema(String),
    #[error("cannot read input: {0}")]
    Input(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] gds_core::Error),
}

impl CliError {
    /// 2 for invalid input, 3 when an exact solver is over budget, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) | CliError::Input(_) | CliError::Usage(_) => 2,
            CliError::Core(gds_core::Error::InvalidParameter(_) | gds_core::Error::Parse(_)) => 2,
            CliError::Core(gds_core::Error::BudgetExceeded { .. } | gds_core::Error::SizeLimit { .. }) => 3,
            CliError::Io(_) | CliError::Core(_) => 1,
        }
    }
}
