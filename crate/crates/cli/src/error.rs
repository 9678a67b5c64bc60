use std::process::ExitCode;

/// Failure of a command, classified for the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Inconsistent flags detected after parsing.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] patchup::Error),

    #[error("{path}: {message}")]
    Manifest { path: String, message: String },
}

impl CliError {
    pub const USAGE: u8 = 1;
    pub const DATA: u8 = 2;
    pub const NUMERICAL: u8 = 3;

    pub fn code(&self) -> u8 {
        use patchup::Error as E;
        match self {
            Self::Usage(_) => Self::USAGE,
            Self::Core(E::Degenerate(_) | E::Diverged { .. }) => Self::NUMERICAL,
            Self::Core(_) | Self::Manifest { .. } => Self::DATA,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
