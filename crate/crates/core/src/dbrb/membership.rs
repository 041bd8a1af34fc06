use std::sync::atomic::{AtomicUsize, Ordering};

use crate::cones::{
    beamformer_from_primal, build_bound_program, build_feasibility_program, ConeProgram, ConeSolution, ConeSolver,
    ConeStatus, FeasibilityGoal, VarLayout,
};
use crate::error::{Error, Result};
use crate::problem::{Beamformer, Instance, SelectionVector, FEASIBILITY_TOL};
use crate::search_box::SearchBox;

/// Instance plus cone backend, with counters for the two kinds of subproblem.
/// Shared by reference across concurrent box evaluations.
pub struct Evaluator<'a> {
    inst: &'a Instance,
    solver: &'a dyn ConeSolver,
    pub feasibility_tol: f64,
    bound_solves: AtomicUsize,
    feasibility_solves: AtomicUsize,
}

impl<'a> Evaluator<'a> {
    pub fn new(inst: &'a Instance, solver: &'a dyn ConeSolver) -> Self {
        Self {
            inst,
            solver,
            feasibility_tol: FEASIBILITY_TOL,
            bound_solves: AtomicUsize::new(0),
            feasibility_solves: AtomicUsize::new(0),
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn solve_bound(&self, prog: &ConeProgram) -> Result<ConeSolution> {
        self.bound_solves.fetch_add(1, Ordering::Relaxed);
        self.solver.solve(prog)
    }

    pub fn solve_feasibility(&self, prog: &ConeProgram) -> Result<ConeSolution> {
        self.feasibility_solves.fetch_add(1, Ordering::Relaxed);
        self.solver.solve(prog)
    }

    /// `(bound-program solves, feasibility-program solves)` so far.
    pub fn counts(&self) -> (usize, usize) {
        (self.bound_solves.load(Ordering::Relaxed), self.feasibility_solves.load(Ordering::Relaxed))
    }

    /// Fixed-selection feasibility at rate floors `z`.
    ///
    /// `Ok(None)` when infeasible, otherwise the physical beamformer found.
    /// Solver breakdowns surface as [`Error::Solver`].
    pub fn find_beamformer(
        &self,
        selection: &SelectionVector,
        z: &[f64],
        goal: FeasibilityGoal,
    ) -> Result<Option<Beamformer>> {
        let Some(prog) = build_feasibility_program(selection, z, self.inst, goal) else {
            return Ok(None);
        };
        let sol = self.solve_feasibility(&prog)?;
        match sol.status {
            ConeStatus::Optimal => {
                let layout: &VarLayout = prog.layout.as_ref().expect("feasibility program has a layout");
                Ok(Some(beamformer_from_primal(self.inst, layout, &sol.primal)))
            }
            ConeStatus::Infeasible => Ok(None),
            ConeStatus::NumericalFailure => {
                Err(Error::Solver(format!("feasibility solve failed after {} iterations", sol.stats.iterations)))
            }
        }
    }

    /// Whether the bounding relaxation over `bx` with objective floor `theta`
    /// admits a point. A `false` answer proves `bx` holds no feasible point
    /// with sum rate at least `theta`; solver breakdowns answer `true`.
    pub fn relaxation_admits(&self, bx: &SearchBox, theta: f64) -> Result<bool> {
        let (nb, nk) = (self.inst.num_bs(), self.inst.num_users());
        if bx.objective_upper() < theta {
            return Ok(false);
        }
        if (0..nk).any(|k| (0..nb).all(|b| bx.x_upper()[b * nk + k] == 0.0)) {
            return Ok(false);
        }
        let cap = self.inst.params().backhaul_cap;
        let min_load = |b: usize| (0..nk).map(|k| bx.x_lower()[b * nk + k] * bx.z_lower()[k]).sum::<f64>();
        if (0..nb).any(|b| min_load(b) > cap) {
            return Ok(false);
        }
        let prog = build_bound_program(bx, self.inst, theta)?;
        Ok(self.solve_bound(&prog)?.status != ConeStatus::Infeasible)
    }
}

/// Exact membership of `(x, z)` in the feasible set of the rate-epigraph
/// problem: every user served, every backhaul within capacity, and a
/// beamformer meeting all rates with the selected links.
pub fn point_in_s(ev: &Evaluator<'_>, x: &SelectionVector, z: &[f64]) -> Result<bool> {
    let inst = ev.instance();
    let (nb, nk) = (inst.num_bs(), inst.num_users());
    if !x.connects_all(nb, nk) {
        return Ok(false);
    }
    let cap = inst.params().backhaul_cap;
    for b in 0..nb {
        let load: f64 = (0..nk).filter(|&k| x.get(b, k, nk)).map(|k| z[k]).sum();
        if load > cap {
            return Ok(false);
        }
    }
    Ok(ev.find_beamformer(x, z, FeasibilityGoal::Find)?.is_some())
}

/// Membership test used to shrink the upper vertex of a box: a point with
/// rates `z` can exist somewhere in `bx` only if the beamformer constraints
/// hold with every allowed link on and the backhaul holds with only the forced
/// links on. Monotone in `z`.
pub(crate) fn box_admits_rates(ev: &Evaluator<'_>, bx: &SearchBox, z: &[f64]) -> Result<bool> {
    let inst = ev.instance();
    let (nb, nk) = (inst.num_bs(), inst.num_users());
    let cap = inst.params().backhaul_cap;
    for b in 0..nb {
        let load: f64 = (0..nk).map(|k| bx.x_lower()[b * nk + k] * z[k]).sum();
        if load > cap {
            return Ok(false);
        }
    }
    let most_links = SelectionVector(bx.x_upper().iter().map(|&v| v == 1.0).collect());
    Ok(ev.find_beamformer(&most_links, z, FeasibilityGoal::Find)?.is_some())
}
