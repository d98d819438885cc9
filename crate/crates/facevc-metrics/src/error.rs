use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, MetricError>;
