use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("no usable rows in input")]
    EmptyData,

    #[error("variable `{0}` has zero variance")]
    DegenerateVariable(String),

    #[error("marginal is constant; cannot build a Gaussian table")]
    DegenerateMarginal,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("flow integration produced non-finite values; increase the number of ODE steps (currently {steps})")]
    IntegrationFailure { steps: usize },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("test error: {0}")]
    Test(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
