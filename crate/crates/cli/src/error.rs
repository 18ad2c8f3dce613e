use liquidation_core::Error as CoreError;

/// Everything that ends a run early, each with a stable exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("computation failed: {0}")]
    Failed(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Failed(_) | Self::Io(_) => 1,
            Self::Assumption(_) => 2,
            Self::Config(_) | Self::Unsupported(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::AssumptionViolated { .. } => Self::Assumption(e.to_string()),
            CoreError::UnsupportedBoundary(_) => Self::Unsupported(e.to_string()),
            CoreError::InvalidParameter { .. } | CoreError::InvalidGrid(_) | CoreError::InvalidArgument(_) => {
                Self::Config(e.to_string())
            }
            _ => Self::Failed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}
