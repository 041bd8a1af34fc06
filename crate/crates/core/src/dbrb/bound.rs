//! Bounding: the SOCP relaxation gives the upper bound of a box and its soft
//! power levels seed a binary search over link selections for a feasible
//! point.

use super::membership::Evaluator;
use crate::cones::{build_bound_program, rates_from_primal, ConeSolver, ConeStatus, FeasibilityGoal};
use crate::error::Result;
use crate::problem::{compute_root_box, Incumbent, Instance, SelectionVector};
use crate::search_box::SearchBox;

/// Added to relaxation optima before they are used as upper bounds, to cover
/// the interior-point solver's optimality gap.
pub const UPPER_BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum BoundOutcome {
    /// The relaxation is infeasible: nothing in the box beats the threshold.
    Prune,
    Bounded { upper: f64, incumbent: Option<Incumbent> },
}

fn better(a: Option<Incumbent>, b: Option<Incumbent>) -> Option<Incumbent> {
    match (a, b) {
        (Some(a), Some(b)) => Some(if b.objective > a.objective { b } else { a }),
        (a, b) => a.or(b),
    }
}

/// Outcome of one selection probe.
enum Probe {
    Infeasible,
    /// Beamformers exist; the candidate is `None` if it failed the backhaul
    /// recheck.
    Feasible(Option<Incumbent>),
}

/// Tries a fixed selection at rate floors `z`. A zero-objective solution is
/// tried first; if its rates overload a backhaul link, the minimum-power
/// solution (whose rates sit at the floors) is tried instead.
fn probe_selection(ev: &Evaluator<'_>, selection: &SelectionVector, z: &[f64]) -> Result<Probe> {
    let inst = ev.instance();
    let Some(w) = ev.find_beamformer(selection, z, FeasibilityGoal::Find)? else {
        return Ok(Probe::Infeasible);
    };
    if let Some(inc) = Incumbent::from_beamformer(inst, selection.clone(), w, ev.feasibility_tol) {
        return Ok(Probe::Feasible(Some(inc)));
    }
    let fallback = ev
        .find_beamformer(selection, z, FeasibilityGoal::MinPower)?
        .and_then(|w| Incumbent::from_beamformer(inst, selection.clone(), w, ev.feasibility_tol));
    Ok(Probe::Feasible(fallback))
}

/// Bisection state over the number of active links `L ∈ [K, BK]`.
/// Feasible probes raise `L_min`, infeasible ones lower `L_max`, and at most
/// `⌈log₂(BK − K)⌉ + 1` probes are made.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkCountSearch {
    l_min: usize,
    l_max: usize,
    probes: usize,
    max_probes: usize,
}

impl LinkCountSearch {
    pub fn new(num_users: usize, num_links: usize) -> Self {
        let max_probes =
            if num_links > num_users { (num_links - num_users).next_power_of_two().trailing_zeros() as usize + 1 } else { 0 };
        Self { l_min: num_users, l_max: num_links, probes: 0, max_probes }
    }

    /// Next link count to try, or `None` when the search is over.
    pub fn next_probe(&self) -> Option<usize> {
        (self.l_min < self.l_max && self.probes < self.max_probes).then(|| (self.l_min + self.l_max) / 2)
    }

    pub fn record(&mut self, l: usize, feasible: bool) {
        self.probes += 1;
        if feasible {
            self.l_min = l + 1;
        } else {
            self.l_max = l - 1;
        }
    }
}

/// The `l` links with the largest soft powers, ties to the smaller index.
pub fn strongest_links(u_star: &[f64], l: usize) -> SelectionVector {
    let mut order: Vec<usize> = (0..u_star.len()).collect();
    order.sort_by(|&a, &b| u_star[b].total_cmp(&u_star[a]).then(a.cmp(&b)));
    let mut bits = vec![false; u_star.len()];
    for &i in &order[..l] {
        bits[i] = true;
    }
    SelectionVector(bits)
}

/// Binary search over the number of active links, probing the strongest
/// links by relaxed soft power at the box's lower rate vertex.
pub fn binary_search_feasible(u_star: &[f64], bx: &SearchBox, ev: &Evaluator<'_>) -> Result<Option<Incumbent>> {
    let inst = ev.instance();
    let mut search = LinkCountSearch::new(inst.num_users(), inst.num_links());
    let mut best = None;
    while let Some(l) = search.next_probe() {
        match probe_selection(ev, &strongest_links(u_star, l), bx.z_lower()) {
            Ok(Probe::Feasible(candidate)) => {
                best = better(best, candidate);
                search.record(l, true);
            }
            Ok(Probe::Infeasible) => search.record(l, false),
            Err(e) => {
                log::debug!("selection probe with {l} links failed: {e}");
                search.record(l, false);
            }
        }
    }
    Ok(best)
}

/// Upper bound and (possibly) a feasible point for a reduced box.
pub fn bound(bx: &SearchBox, theta: f64, ev: &Evaluator<'_>) -> Result<BoundOutcome> {
    let inst = ev.instance();
    let vertex_bound = bx.objective_upper();
    let prog = build_bound_program(bx, inst, theta)?;
    let sol = ev.solve_bound(&prog)?;
    let layout = prog.layout.as_ref().expect("bound program has a layout");

    let (upper, mut incumbent) = match sol.status {
        ConeStatus::Infeasible => return Ok(BoundOutcome::Prune),
        ConeStatus::NumericalFailure => (vertex_bound, None),
        ConeStatus::Optimal => {
            let relaxed: f64 = rates_from_primal(layout, &sol.primal).unwrap().iter().sum();
            let u_star = &sol.primal[layout.u..layout.u + layout.num_links];
            let found = binary_search_feasible(u_star, bx, ev)?;
            ((relaxed + UPPER_BOUND_SLACK).min(vertex_bound), found)
        }
    };

    // With the selection pinned, the lower vertex itself is a candidate.
    if bx.selection_fixed() {
        let selection = SelectionVector(bx.x_lower().iter().map(|&v| v == 1.0).collect());
        match probe_selection(ev, &selection, bx.z_lower()) {
            Ok(Probe::Feasible(candidate)) => incumbent = better(incumbent, candidate),
            Ok(Probe::Infeasible) => {}
            Err(e) => log::debug!("vertex probe failed: {e}"),
        }
    }
    Ok(BoundOutcome::Bounded { upper, incumbent })
}

/// One-shot heuristic: solve the relaxation over the root box, run the
/// selection binary search on its soft powers, and fall back to serving every
/// link at the minimum rates if that finds nothing.
pub fn root_heuristic(inst: &Instance, solver: &dyn ConeSolver) -> Result<Option<Incumbent>> {
    let ev = Evaluator::new(inst, solver);
    heuristic_with(&ev)
}

pub(crate) fn heuristic_with(ev: &Evaluator<'_>) -> Result<Option<Incumbent>> {
    let inst = ev.instance();
    let root = match compute_root_box(inst) {
        Ok(root) => root,
        Err(crate::error::Error::InfeasibleInstance { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let theta = inst.num_users() as f64 * inst.min_rate();
    let prog = build_bound_program(&root, inst, theta)?;
    let sol = ev.solve_bound(&prog)?;
    let layout = prog.layout.as_ref().expect("bound program has a layout");
    let mut best = None;
    if sol.status == ConeStatus::Optimal {
        let u_star = &sol.primal[layout.u..layout.u + layout.num_links];
        best = binary_search_feasible(u_star, &root, ev)?;
    }
    if best.is_none() {
        let everyone = SelectionVector(vec![true; inst.num_links()]);
        if let Ok(Probe::Feasible(candidate)) = probe_selection(ev, &everyone, root.z_lower()) {
            best = candidate;
        }
    }
    Ok(best)
}
