//! Sampling, Paley-Wiener spaces and variational splines for spectrally
//! defined bandlimited functions on discretized sub-Laplacians, graph
//! Laplacians and the periodic circle.

pub mod cli;
pub mod error;
pub mod inequality;
pub mod linalg;
pub mod operator;
pub mod spectral;
pub mod splines;

pub use error::{Error, Result};
