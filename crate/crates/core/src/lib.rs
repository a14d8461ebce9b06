//! Numerical laboratory for equivariant wave maps on rotationally symmetric
//! manifolds: profile admissibility, reduction to a radial semilinear wave
//! equation on a higher-dimensional flat space, spectral calculus for the
//! reduced operator, linear-estimate monitors and nonlinear evolution.

pub mod admissibility;
pub mod closed_forms;
pub mod error;
pub mod estimates;
pub mod expr;
pub mod jet;
pub mod grid;
pub mod profiles;
pub mod quadrature;
pub mod reduction;
pub mod resolvent;
pub mod runner;
pub mod scenario;
pub mod spectral;
pub mod tridiag;
pub mod wave;

pub use error::{Error, Result};
