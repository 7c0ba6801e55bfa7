//! Linear algebra kernels: dense LU for the simulator's Newton systems and a
//! sparse LDL^T for the interior-point KKT systems.

pub mod dense;
pub mod sparse;

pub use dense::{DenseLu, Singular};
pub use sparse::{minimum_degree, CscMatrix, LdlError, LdlSolver};
