//! Numerical laboratory for polynomial shift-like automorphisms of `C^k`.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod filtration;
pub mod hyperbolicity;
pub mod measures;
pub mod potential;
pub mod qmc;
pub mod render;
pub mod roots;
pub mod types;

pub use error::{Error, Result};
pub use types::{ComplexMatrix, Point, PolySpec, ShiftSpec};
