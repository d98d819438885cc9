use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file at byte {offset}: {what}")]
    Format { offset: usize, what: String },
}

pub type Result<T> = std::result::Result<T, DspError>;
