use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] hom_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for anything wrong with the setup, 2 for failures on the data.
    pub fn exit_code(&self) -> u8 {
        use hom_core::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Core(E::Config(_) | E::Domain(_) | E::InvalidEnvelope(_)) => 1,
            CliError::Io { .. } | CliError::Core(_) => 2,
        }
    }
}
