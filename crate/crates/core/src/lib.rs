pub mod codec;
pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod zoo;

pub use error::{Error, Result};
pub use tensor::Tensor;
