//! Slope predictions for multiple Dirichlet eigenvalues under domain
//! perturbations, with an independent finite-element validation engine and
//! a finite-dimensional degenerate implicit function solver.

pub mod branches;
pub mod config;
pub mod dift;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod hadamard;
pub mod modes;
pub mod pencil;
pub mod pipeline;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, ErrorKind, Result};
