//! Weak Galerkin finite elements on triangulations of the unit square and the
//! L-shaped domain, with Poisson solves and eigenvalue approximations that
//! bound the Laplace spectrum from below.

pub mod analysis;
pub mod assembly;
pub mod basis;
pub mod cli;
pub mod error;
pub mod mesh;
pub mod solvers;
pub mod sparse;
pub mod wg;

pub use error::{Result, WgError};
