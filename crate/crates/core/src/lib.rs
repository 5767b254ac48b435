pub mod data;
pub mod diffusion;
pub mod error;
pub mod harness;
pub mod nn;
pub mod prep;
pub mod refine;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
