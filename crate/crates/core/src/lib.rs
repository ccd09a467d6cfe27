pub mod audio;
pub mod cli;
pub mod error;
mod fsutil;
pub mod model;
pub mod nn;
pub mod optim;
pub mod params;
pub mod seed;
pub mod tensor;
pub mod text;
pub mod train;

pub use error::{Error, Result};
pub use tensor::{Init, Tensor};
