//! Discrete branch-reduce-and-bound over `s = (x, z)`.
//!
//! Boxes are split along their longest edge, shrunk by [`reduce`] using
//! feasibility probes and the objective cut, and bounded by an SOCP
//! relaxation whose soft powers seed a binary search for feasible link
//! selections.

mod bound;
mod branch;
mod engine;
mod membership;
mod reduce;

pub use bound::{
    binary_search_feasible, bound, root_heuristic, strongest_links, BoundOutcome, LinkCountSearch, UPPER_BOUND_SLACK,
};
pub use branch::{branch, select_box, Node};
pub use engine::{solve_dbrb, solve_dbrb_with, DbrbOptions, SolveResult, Termination, TraceRow};
pub use membership::{point_in_s, Evaluator};
pub use reduce::{reduce, ReductionOptions};
