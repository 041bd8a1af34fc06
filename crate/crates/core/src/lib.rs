//! Globally optimal joint beamforming and BS-user link selection for a
//! multicell downlink whose base stations share data over capacity-limited
//! backhaul links.
//!
//! The sum rate is maximized subject to per-user SINR targets, per-BS power
//! budgets and per-BS backhaul capacities. The solver in [`dbrb`] runs a
//! discrete branch-reduce-and-bound search over link selections and user
//! rates, bounding boxes with second-order cone relaxations built in
//! [`cones`]. [`oracle`] holds a brute-force reference for tiny instances.

pub mod cones;
pub mod dbrb;
pub mod error;
pub mod oracle;
pub mod problem;
pub mod scenario;
pub mod search_box;
pub mod units;

pub use dbrb::{solve_dbrb, solve_dbrb_with, DbrbOptions, SolveResult, Termination, TraceRow};
pub use error::{Error, Result};
pub use problem::{
    backhaul_usage, check_feasible, compute_root_box, rate, rates, sinr, soc_rotate, Beamformer, FeasibilityReport,
    Incumbent, Instance, RateVector, SelectionVector, SoftPower, FEASIBILITY_TOL,
};
pub use scenario::{generate_scenario, pathloss_db, ChannelSet, ScenarioFile, SystemParams};
pub use search_box::SearchBox;
