pub mod algorithms;
pub mod beamform;
pub mod conic;
pub mod error;
pub mod harness;
pub mod scenario;

pub use error::{Error, Result};
