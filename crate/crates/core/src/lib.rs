pub mod autodiff;
pub mod data;
pub mod error;
pub mod manifolds;
pub mod nn;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
