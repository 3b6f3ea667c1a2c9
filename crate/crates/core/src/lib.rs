pub mod error;
pub mod linalg;
pub mod rng;
pub mod states;
pub mod channels;
pub mod entropy;
pub mod optim;
pub mod measures;
pub mod reldiff;
pub mod harness;

pub use error::{Error, Result};
