//! Fields on the periodic unit torus in spectral representation.

pub mod field;
pub mod grid;
pub mod norms;
pub mod ops;
pub mod random;
pub mod snapshot;

pub use field::{Field, Rank};
pub use grid::Grid;
