//! Minimal reverse-mode differentiable tensor engine.
//!
//! Parameters live as f32 in a [`ParameterRegistry`]; each forward pass
//! builds a fresh [`Graph`] that computes in f64 and hands gradients back to
//! the registry. A finite-difference oracle ([`grad_check`]) validates every
//! composite built on top.

pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod linear;
pub mod ops;
pub mod registry;
pub mod tensor;

pub use error::{NnError, Result};
pub use gradcheck::{grad_check, grad_check_filtered};
pub use graph::{Graph, ValueId};
pub use linear::{LinearLayer, MatParam};
pub use registry::ParameterRegistry;
pub use tensor::Tensor;
