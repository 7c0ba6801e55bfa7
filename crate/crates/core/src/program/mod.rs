//! Convex conic programs for the security region: the lifted transient model
//! (rank-minimization and capped variants), the relaxed bound program and the
//! steady-state program.

pub mod builder;
pub mod conic;
pub mod ratio;

pub use builder::{build, build_dsr1, build_dsr2, build_relaxed_bound, build_ssr, BuiltProgram, Direction, LiftedSolution, Model, Objective};
pub use conic::{ConeTag, ConicProgram, RotatedCone};
pub use ratio::{relaxation_ratio, RelaxationRatio, DEFAULT_RANK_ONE_THRESHOLD};

#[cfg(test)]
mod tests;
