//! Determinantal kernels of weighted polynomial spaces, equilibrium measures
//! from an obstacle problem, and weighted Fekete / Monte Carlo configurations
//! of the two-dimensional Coulomb gas.

pub mod config;
pub mod ensemble;
pub mod equilibrium;
pub mod error;
pub mod exec;
pub mod fekete;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod potential;
pub mod quadrature;
pub mod sampler;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Exec;
pub use grid::{BoxGrid, ScalarField};
pub use potential::{ComplexPoint, Potential};
