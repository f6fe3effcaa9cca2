use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] fpp_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("preset file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown figure id `{0}` (expected one of {1})")]
    UnknownFigure(String, String),
    #[error("unknown preset `{0}` (available: {1})")]
    UnknownPreset(String, String),
    #[error("figure `{0}` cannot be emitted from a {1} result")]
    WrongStudy(String, &'static str),
}

impl HarnessError {
    /// Errors caused by the caller's request rather than by I/O or numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            HarnessError::Spec(_)
                | HarnessError::Toml(_)
                | HarnessError::UnknownFigure(..)
                | HarnessError::UnknownPreset(..)
                | HarnessError::WrongStudy(..)
        ) || matches!(self, HarnessError::Core(e) if !e.is_numerical())
    }
}
