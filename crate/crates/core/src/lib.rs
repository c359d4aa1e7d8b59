//! Training-free neural architecture scoring with neural tangent kernels.

pub mod archspace;
pub mod config;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod search;
pub mod spectral;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
