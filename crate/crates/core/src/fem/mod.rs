//! Piecewise-linear finite elements for the Dirichlet Laplacian on mapped
//! planar meshes.

pub mod assemble;
pub mod eigs;
pub mod mesh;
pub mod sparse;

pub use assemble::{assemble, assemble_nodes, boundary_flux, element_matrices, FemSystem};
pub use eigs::{lowest_eigs, EigOptions, EigResult};
pub use mesh::{mesh_domain, Mesh};
pub use sparse::{SparseCholesky, SparseSym};
