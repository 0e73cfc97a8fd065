use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent configuration (layouts, budgets, strategy settings).
    #[error("configuration error: {0}")]
    Config(String),
    /// Invalid arguments to an operation.
    #[error("input error: {0}")]
    Input(String),
    /// A computation produced or received a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A metric is undefined for the given masks (e.g. ASD of an empty mask).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),
    /// A statistical test is undefined for the given samples.
    #[error("undefined test: {0}")]
    UndefinedTest(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
