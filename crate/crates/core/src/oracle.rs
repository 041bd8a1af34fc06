//! Brute-force reference optimizer for tiny instances.
//!
//! Every connected selection is enumerated and the rates are searched on a
//! uniform grid of step `δ` over the root box. For a fixed selection the
//! feasible rates form a down-set, so along the last user's axis the largest
//! feasible grid point is found by bisection over grid indices, and an outer
//! coordinate stops increasing once the point with all later coordinates at
//! their minimum is infeasible. The result is within `K·δ` below the optimum.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{build_feasibility_program, ClarabelSolver, ConeSolver, ConeStatus, FeasibilityGoal};
use crate::dbrb::{solve_dbrb, DbrbOptions, SolveResult, Termination, TraceRow};
use crate::error::{Error, Result};
use crate::problem::{compute_root_box, Instance, SelectionVector};
use crate::scenario::ScenarioFile;
use crate::search_box::SearchBox;

pub const DEFAULT_GRID_STEP: f64 = 0.05;
pub const MAX_LINKS: usize = 8;
pub const MAX_USERS: usize = 3;

const RETRY_TOL: f64 = 1e-7;
const BOUNDARY_SHIFT: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Best grid objective, `None` if no grid point is feasible.
    pub objective: Option<f64>,
    pub selection: Option<SelectionVector>,
    pub rates: Option<Vec<f64>>,
    pub grid_step: f64,
    pub feasibility_solves: usize,
}

struct GridSearch<'a> {
    inst: &'a Instance,
    solver: &'a dyn ConeSolver,
    grids: Vec<Vec<f64>>,
    cache: HashMap<(u64, Vec<usize>), bool>,
    solves: usize,
}

impl GridSearch<'_> {
    fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(k, &i)| self.grids[k][i]).collect()
    }

    fn feasible(&mut self, key: u64, sel: &SelectionVector, idx: &[usize]) -> Result<bool> {
        if let Some(&hit) = self.cache.get(&(key, idx.to_vec())) {
            return Ok(hit);
        }
        let z = self.point(idx);
        let ok = within_backhaul(self.inst, sel, &z) && socp_feasible(self.inst, self.solver, sel, &z, &mut self.solves)?;
        self.cache.insert((key, idx.to_vec()), ok);
        Ok(ok)
    }

    /// Best `(Σ z, indices)` for the selection, with coordinates before `dim`
    /// fixed in `idx`.
    fn search(
        &mut self,
        key: u64,
        sel: &SelectionVector,
        idx: &mut Vec<usize>,
        dim: usize,
    ) -> Result<Option<(f64, Vec<usize>)>> {
        let last = self.grids.len() - 1;
        idx[dim..].iter_mut().for_each(|i| *i = 0);
        if !self.feasible(key, sel, idx)? {
            return Ok(None);
        }
        if dim == last {
            let (mut lo, mut hi) = (0usize, self.grids[last].len() - 1);
            idx[last] = hi;
            if self.feasible(key, sel, idx)? {
                lo = hi;
            } else {
                // invariant: lo feasible, hi infeasible
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    idx[last] = mid;
                    if self.feasible(key, sel, idx)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            idx[last] = lo;
            let value = self.point(idx).iter().sum();
            return Ok(Some((value, idx.clone())));
        }
        let mut best: Option<(f64, Vec<usize>)> = None;
        for i in 0..self.grids[dim].len() {
            idx[dim] = i;
            match self.search(key, sel, idx, dim + 1)? {
                None => break,
                Some(found) => {
                    if best.as_ref().is_none_or(|b| found.0 > b.0) {
                        best = Some(found);
                    }
                }
            }
        }
        Ok(best)
    }
}

fn within_backhaul(inst: &Instance, sel: &SelectionVector, z: &[f64]) -> bool {
    let p = inst.params();
    let nk = p.num_users;
    (0..p.num_bs).all(|b| (0..nk).filter(|&k| sel.get(b, k, nk)).map(|k| z[k]).sum::<f64>() <= p.backhaul_cap)
}

/// Cone feasibility of `z` under `sel`. A numerical failure is retried as a
/// minimum-power problem, then at a looser tolerance, and finally decided at
/// `z` lowered by `BOUNDARY_SHIFT` per user (such points sit on the boundary
/// of the feasible set, where the program has no interior).
fn socp_feasible(
    inst: &Instance,
    solver: &dyn ConeSolver,
    sel: &SelectionVector,
    z: &[f64],
    solves: &mut usize,
) -> Result<bool> {
    if let Some(v) = socp_attempts(inst, solver, sel, z, solves)? {
        return Ok(v);
    }
    let floor = inst.min_rate();
    let shifted: Vec<f64> = z.iter().map(|&v| (v - BOUNDARY_SHIFT).max(floor)).collect();
    match socp_attempts(inst, solver, sel, &shifted, solves)? {
        Some(v) => Ok(v),
        None => Err(Error::Solver(format!("oracle feasibility check failed at z = {z:?}"))),
    }
}

fn socp_attempts(
    inst: &Instance,
    solver: &dyn ConeSolver,
    sel: &SelectionVector,
    z: &[f64],
    solves: &mut usize,
) -> Result<Option<bool>> {
    let retry = ClarabelSolver { tol: RETRY_TOL, max_iter: 500 };
    let attempts: [(FeasibilityGoal, &dyn ConeSolver); 3] =
        [(FeasibilityGoal::Find, solver), (FeasibilityGoal::MinPower, solver), (FeasibilityGoal::MinPower, &retry)];
    for (goal, s) in attempts {
        let prog = build_feasibility_program(sel, z, inst, goal).expect("selection serves every user");
        *solves += 1;
        match s.solve(&prog)?.status {
            ConeStatus::Optimal => return Ok(Some(true)),
            ConeStatus::Infeasible => return Ok(Some(false)),
            ConeStatus::NumericalFailure => log::debug!("oracle check at z = {z:?} failed with {goal:?}"),
        }
    }
    Ok(None)
}

/// Exact membership of `(x, z)` in the feasible set, by the oracle's own
/// cone check.
pub fn oracle_point_in_s(inst: &Instance, sel: &SelectionVector, z: &[f64]) -> Result<bool> {
    if !sel.connects_all(inst.num_bs(), inst.num_users()) || !within_backhaul(inst, sel, z) {
        return Ok(false);
    }
    socp_feasible(inst, &ClarabelSolver::default(), sel, z, &mut 0)
}

/// Up to `count` random feasible points `(x, z)` of the box with
/// `Σ z >= theta`, from at most `max_rays` random rays.
///
/// Each ray picks a selection inside the box and a nonnegative direction
/// from the lower rate vertex. For a fixed selection the feasible rates form
/// a down-set, so the feasible part of the ray is an interval whose end is
/// found by bisection; the sample is drawn uniformly from the part of that
/// interval with `Σ z >= theta` and certified by the cone check.
pub fn sample_feasible_points(
    inst: &Instance,
    bx: &SearchBox,
    theta: f64,
    count: usize,
    seed: u64,
    max_rays: usize,
) -> Result<Vec<(SelectionVector, Vec<f64>)>> {
    const BISECTION_STEPS: usize = 24;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nl = bx.num_links();
    let (p, q) = (bx.z_lower(), bx.z_upper());
    let mut out = Vec::with_capacity(count);
    for _ in 0..max_rays {
        if out.len() == count {
            break;
        }
        let sel = SelectionVector(
            (0..nl)
                .map(|i| if bx.lower()[i] == bx.upper()[i] { bx.lower()[i] == 1.0 } else { rng.random::<bool>() })
                .collect(),
        );
        let dir: Vec<f64> = p.iter().zip(q).map(|(a, b)| (b - a) * rng.random::<f64>()).collect();
        let at = |t: f64| -> Vec<f64> { p.iter().zip(&dir).map(|(a, d)| a + t * d).collect() };
        let total = |t: f64| at(t).iter().sum::<f64>();
        // inconclusive checks count as infeasible: they only shorten the ray
        let inside = |z: &[f64]| oracle_point_in_s(inst, &sel, z).unwrap_or(false);
        if total(1.0) < theta || !inside(p) {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        if inside(&at(1.0)) {
            lo = 1.0;
        } else {
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if inside(&at(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let slope: f64 = dir.iter().sum();
        let t_theta = if slope > 0.0 { ((theta - p.iter().sum::<f64>()) / slope).max(0.0) } else { 0.0 };
        if t_theta > lo {
            continue;
        }
        let z = at(rng.random_range(t_theta..=lo));
        if z.iter().sum::<f64>() >= theta && inside(&z) {
            out.push((sel, z));
        }
    }
    Ok(out)
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if hi - g[n] > 1e-12 {
        g.push(hi);
    }
    g
}

pub fn enumerate_optimal(inst: &Instance, grid_step: f64) -> Result<OracleResult> {
    enumerate_optimal_with(inst, grid_step, &ClarabelSolver::default())
}

pub fn enumerate_optimal_with(inst: &Instance, grid_step: f64, solver: &dyn ConeSolver) -> Result<OracleResult> {
    let (nb, nk, nl) = (inst.num_bs(), inst.num_users(), inst.num_links());
    if nl > MAX_LINKS || nk > MAX_USERS {
        return Err(Error::CostGuard(format!(
            "brute force needs at most {MAX_LINKS} links and {MAX_USERS} users, got {nl} links and {nk} users"
        )));
    }
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidParam { name: "grid_step", reason: format!("must be positive, got {grid_step}") });
    }
    let empty = OracleResult { objective: None, selection: None, rates: None, grid_step, feasibility_solves: 0 };
    let root = match compute_root_box(inst) {
        Ok(root) => root,
        Err(Error::InfeasibleInstance { .. }) => return Ok(empty),
        Err(e) => return Err(e),
    };
    let grids = (0..nk).map(|k| grid(root.z_lower()[k], root.z_upper()[k], grid_step)).collect();
    let mut search = GridSearch { inst, solver, grids, cache: HashMap::new(), solves: 0 };

    let mut best: Option<(f64, SelectionVector, Vec<usize>)> = None;
    for bits in 0u64..(1u64 << nl) {
        let sel = SelectionVector((0..nl).map(|i| bits >> i & 1 == 1).collect());
        if !sel.connects_all(nb, nk) {
            continue;
        }
        let mut idx = vec![0; nk];
        if let Some((value, at)) = search.search(bits, &sel, &mut idx, 0)? {
            if best.as_ref().is_none_or(|b| value > b.0) {
                best = Some((value, sel, at));
            }
        }
    }
    Ok(match best {
        Some((value, sel, at)) => OracleResult {
            objective: Some(value),
            selection: Some(sel),
            rates: Some(search.point(&at)),
            grid_step,
            feasibility_solves: search.solves,
        },
        None => OracleResult { feasibility_solves: search.solves, ..empty },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub scenario: ScenarioFile,
    pub dbrb_trace: Vec<TraceRow>,
    pub oracle: OracleResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub oracle_objective: Option<f64>,
    pub dbrb_lower: Option<f64>,
    pub dbrb_upper: Option<f64>,
    pub dbrb_termination: Termination,
    pub dbrb_iterations: usize,
    pub oracle_solves: usize,
    /// `K·δ + ε` bound on `|LB − oracle|`.
    pub lower_tolerance: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub both_infeasible: bool,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
}

/// Slack on `UB >= oracle` for solver round-off.
pub const UPPER_CHECK_TOL: f64 = 1e-6;

/// Compares a finished DBRB run with an oracle result.
pub fn compare(inst: &Instance, oracle: &OracleResult, dbrb: &SolveResult, eps_abs: f64) -> ComparisonReport {
    let nk = inst.num_users() as f64;
    let lower_tolerance = nk * oracle.grid_step + eps_abs;
    let dbrb_infeasible = dbrb.termination == Termination::Infeasible;
    let both_infeasible = dbrb_infeasible && oracle.objective.is_none();
    let (lower_ok, upper_ok) = match oracle.objective {
        Some(o) if !dbrb_infeasible => {
            ((dbrb.lower - o).abs() <= lower_tolerance, dbrb.upper >= o - UPPER_CHECK_TOL)
        }
        _ => (both_infeasible, both_infeasible),
    };
    let pass = lower_ok && upper_ok;
    ComparisonReport {
        oracle_objective: oracle.objective,
        dbrb_lower: (!dbrb_infeasible).then_some(dbrb.lower),
        dbrb_upper: (!dbrb_infeasible).then_some(dbrb.upper),
        dbrb_termination: dbrb.termination,
        dbrb_iterations: dbrb.iterations,
        oracle_solves: oracle.feasibility_solves,
        lower_tolerance,
        lower_ok,
        upper_ok,
        both_infeasible,
        pass,
        divergence: (!pass).then(|| Divergence {
            scenario: ScenarioFile::new(inst.params(), inst.channels()),
            dbrb_trace: dbrb.trace.clone(),
            oracle: oracle.clone(),
        }),
    }
}

/// Runs both optimizers on the instance and compares them.
pub fn oracle_vs_dbrb(inst: &Instance, grid_step: f64, opts: &DbrbOptions) -> Result<ComparisonReport> {
    let oracle = enumerate_optimal(inst, grid_step)?;
    let dbrb = solve_dbrb(inst, opts)?;
    Ok(compare(inst, &oracle, &dbrb, opts.eps_abs))
}
