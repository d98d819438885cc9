//! Objective evaluation metrics: cosine-based speaker-embedding scores and
//! edit-distance error rates.

pub mod edit;
pub mod embedding;
pub mod error;

pub use edit::{char_error_rate, edit_distance, edit_error_rate, word_error_rate, TokenSequence};
pub use embedding::{cosine, sec, secs, sed, EmbeddingSet};
pub use error::{MetricError, Result};
