use thiserror::Error;

/// Failures mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, arguments or model parameters. Exit code 2.
    #[error("{0}")]
    Validation(String),
    /// The run itself failed, e.g. a setting saw no coincidences. Exit code 3.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<bellfake::Error> for CliError {
    fn from(e: bellfake::Error) -> Self {
        use bellfake::Error::*;
        match e {
            InvalidInput(_) | MalformedCurve(_) | InfeasibleGeometry { .. } => CliError::Validation(e.to_string()),
            AllZeroCoincidences(_) | SingularRatio | MergeMismatch(_) | Io(_) => CliError::Runtime(e.to_string()),
        }
    }
}
