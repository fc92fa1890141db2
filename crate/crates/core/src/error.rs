use thiserror::Error;

use crate::types::SettingPair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed response curve: {0}")]
    MalformedCurve(String),

    #[error("no coincidences recorded for setting {0}; correlation is undefined")]
    AllZeroCoincidences(SettingPair),

    #[error("ratio N_sim/N_dif is singular at E = 1")]
    SingularRatio,

    #[error("no trigger intensity satisfies the {row} constraints (phi0 = {phi0}°, phi1 = {phi1}°)")]
    InfeasibleGeometry { row: String, phi0: f64, phi1: f64 },

    #[error("cannot merge summaries: {0}")]
    MergeMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
