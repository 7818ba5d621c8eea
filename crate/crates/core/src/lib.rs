pub mod error;
pub mod harness;
pub mod model;
pub mod nn;
pub mod solver;

pub use error::{Error, Result};
