//! Two-scale finite elements for integral (nonlocal) plane elasticity.

pub mod assembly;
pub mod bridge;
pub mod child;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod manufactured;
pub mod mesh;
pub mod quadrature;
pub mod shape;
pub mod showcase;
pub mod solver;
pub mod sparse;
pub mod special;

pub use error::{Error, Result};
