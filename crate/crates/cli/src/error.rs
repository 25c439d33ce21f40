use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] metahit::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// 2 for anything wrong with the inputs, 3 for numerical or check failures.
    pub fn exit_code(&self) -> u8 {
        use metahit::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Csv(_) => 2,
            CliError::Core(E::InvalidPair(_) | E::ParamOutOfRange(_) | E::InvalidInput(_) | E::InsufficientGrid(_) | E::Io(_) | E::Json(_)) => 2,
            CliError::Core(_) | CliError::ChecksFailed(_) => 3,
        }
    }
}
