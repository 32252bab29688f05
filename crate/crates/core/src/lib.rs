pub mod cli;
pub mod error;
pub mod generator;
pub mod moments;
pub mod numerics;
pub mod posterior;
pub mod sampler;

pub use error::{Error, GeneratorError, Result};
