//! End-to-end face-voice conversion pipeline: synthetic corpus, training
//! with alternating density-network fitting, inference, face interpolation,
//! evaluation, and the on-disk formats tying them together.

pub mod checkpoint;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evalcmd;
pub mod features;
pub mod idfv;
pub mod infer;
pub mod interp;
pub mod optimizer;
pub mod train;

pub use config::RunConfig;
pub use error::{PipelineError, Result};
