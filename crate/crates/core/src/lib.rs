//! Numerical certification of uniform persistence for population models
//! given as maps or ODEs on the nonnegative orthant.
//!
//! The pipeline restricts a model to the extinction set of a focal block,
//! estimates the limit sets of the boundary dynamics, checks that each one
//! repels the interior (spectral radius above one or a positive Lyapunov
//! exponent of the focal cocycle), and backs the result with an empirical
//! liminf over a grid of interior initial conditions.

pub mod boundary;
pub mod cli;
pub mod dynsys;
pub mod error;
pub mod exec;
pub mod linearize;
pub mod matrix;
pub mod models;
pub mod persist;
pub mod sampling;

pub use error::{Error, Result};
pub use exec::Execution;
pub use matrix::Matrix;
