pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod initial_data;
pub mod linalg;
pub mod ns;
pub mod relax;
pub mod spectral;

pub use error::{Error, Result};
