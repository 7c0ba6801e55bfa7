//! Dynamic security region of natural gas networks.
//!
//! The core is generic over the floating point type; the aliases below fix it
//! to `f64`, which is what the binaries and datasets use.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::type_complexity)]

pub mod error;
pub mod fe;
pub mod grid;
pub mod linalg;
pub mod network;
pub mod plot;
pub mod program;
pub mod region;
pub mod scalar;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use network::GasNetwork;
pub use region::{DSRegion, RegionMode};

pub type SteadyStateF64 = sim::SteadyState<f64>;
pub type TrajectoryF64 = sim::Trajectory<f64>;
pub type ConicProgramF64 = program::conic::ConicProgram<f64>;
pub type LiftedSolutionF64 = program::builder::LiftedSolution<f64>;
pub type SolveResultF64 = solver::SolveResult<f64>;
pub type BoundaryResultF64 = fe::BoundaryResult<f64>;
pub type RegionEvaluationF64 = region::RegionEvaluation<f64>;
