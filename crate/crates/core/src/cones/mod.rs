//! Conic programs: representation, solver backend, and the SOCP subproblems
//! built from a search box or a fixed link selection.

mod builders;
pub mod conformance;
mod envelope;
mod program;
pub mod realify;
mod solver;

pub use builders::{
    beamformer_from_primal, build_bound_program, build_feasibility_program, rates_from_primal,
    selection_from_primal, soft_power_from_primal, FeasibilityGoal,
};
pub use envelope::{envelope_phi, envelope_pieces};
pub use program::{Cone, ConeProgram, LinExpr, ProgramBuilder, VarLayout};
pub use solver::{solve, ClarabelSolver, ConeSolution, ConeSolver, ConeStatus, SolverStats, DEFAULT_SOLVER_TOL};
