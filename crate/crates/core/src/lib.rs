//! Structure learning for Gaussian graphical models.

pub mod cli;
pub mod error;
pub mod evalbench;
pub mod generators;
pub mod json;
pub mod learners;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod regress;
pub mod sampler;

pub use error::{Error, Result};
