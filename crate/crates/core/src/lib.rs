pub mod energy;
pub mod finite_temp;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod json;
pub mod linalg;
pub mod optimize;
pub mod stats;
pub mod studies;
#[cfg(test)]
pub(crate) mod testing;
pub mod zero_temp;

pub use error::{Error, Result};

pub const CODE_VERSION: &str = concat!("polyhom ", env!("CARGO_PKG_VERSION"));
