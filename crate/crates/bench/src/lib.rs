//! Shared fixtures for the solver benchmarks.

use comp_core::{Instance, SystemParams};

/// A desk-scale instance: `nb` two-antenna sites, `nk` users, backhaul in
/// nats per channel use.
pub fn instance(nb: usize, nk: usize, backhaul: f64, seed: u64) -> Instance {
    let p = SystemParams { num_bs: nb, antennas_per_bs: 2, num_users: nk, backhaul_cap: backhaul, ..SystemParams::default() };
    Instance::generate(p, seed).expect("benchmark instance")
}
