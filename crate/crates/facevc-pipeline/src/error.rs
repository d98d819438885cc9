//! Pipeline error taxonomy mapped onto process exit codes: 2 validation,
//! 3 i/o, 4 numeric.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("numeric error: {0}")]
    Numeric(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Validation(_) => 2,
            PipelineError::Io(_) => 3,
            PipelineError::Numeric(_) => 4,
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

impl From<facevc_nn::NnError> for PipelineError {
    fn from(e: facevc_nn::NnError) -> Self {
        match e {
            facevc_nn::NnError::Numeric(m) => PipelineError::Numeric(m),
            other => PipelineError::Validation(other.to_string()),
        }
    }
}

impl From<facevc_dsp::DspError> for PipelineError {
    fn from(e: facevc_dsp::DspError) -> Self {
        match e {
            facevc_dsp::DspError::Io(io) => PipelineError::Io(io.to_string()),
            facevc_dsp::DspError::Format { offset, what } => {
                PipelineError::Io(format!("malformed file at byte {offset}: {what}"))
            }
            facevc_dsp::DspError::Validation(m) => PipelineError::Validation(m),
        }
    }
}

impl From<facevc_metrics::MetricError> for PipelineError {
    fn from(e: facevc_metrics::MetricError) -> Self {
        PipelineError::Validation(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
