use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bound::{bound, heuristic_with, BoundOutcome};
use super::branch::{branch, Node};
use super::membership::Evaluator;
use super::reduce::{reduce, ReductionOptions};
use crate::cones::{ClarabelSolver, ConeSolver, DEFAULT_SOLVER_TOL};
use crate::error::{Error, Result};
use crate::problem::{compute_root_box, Incumbent, Instance, FEASIBILITY_TOL};
use crate::search_box::SearchBox;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbrbOptions {
    pub eps_rel: f64,
    /// Absolute gap in nats per channel use.
    pub eps_abs: f64,
    pub max_iter: usize,
    /// Worker threads for evaluating the two children of a split; 0 runs
    /// everything on the calling thread.
    pub threads: usize,
    pub reduction: ReductionOptions,
    pub solver_tol: f64,
    pub feasibility_tol: f64,
    /// Seed the best objective with the root relaxation heuristic.
    pub heuristic_start: bool,
}

impl Default for DbrbOptions {
    fn default() -> Self {
        Self {
            eps_rel: 1e-3,
            eps_abs: 1e-4,
            max_iter: 100_000,
            threads: 0,
            reduction: ReductionOptions::default(),
            solver_tol: DEFAULT_SOLVER_TOL,
            feasibility_tol: FEASIBILITY_TOL,
            heuristic_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Gap closed to within the requested tolerance.
    Converged,
    /// No live boxes remain; the incumbent is optimal.
    Exhausted,
    IterationLimit,
    /// No feasible point exists.
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub ub: f64,
    pub lb: f64,
    pub live_boxes: usize,
    pub socp_solves: usize,
    pub feas_solves: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub incumbent: Option<Incumbent>,
    pub upper: f64,
    pub lower: f64,
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
    pub iterations: usize,
}

impl SolveResult {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn relative_gap(&self) -> f64 {
        (self.upper - self.lower) / self.upper.abs().max(1.0)
    }
}

/// Best objective so far plus the point that attains it.
struct Best {
    theta: f64,
    incumbent: Option<Incumbent>,
}

impl Best {
    fn offer(&mut self, candidate: Option<Incumbent>) -> bool {
        match candidate {
            Some(c) if c.objective > self.theta || (self.incumbent.is_none() && c.objective >= self.theta) => {
                self.theta = self.theta.max(c.objective);
                self.incumbent = Some(c);
                true
            }
            _ => false,
        }
    }
}

enum Evaluated {
    Empty,
    Live { bx: SearchBox, upper: f64, incumbent: Option<Incumbent> },
}

fn evaluate(bx: &SearchBox, theta: f64, ev: &Evaluator<'_>, opts: &DbrbOptions) -> Result<Evaluated> {
    let Some(reduced) = reduce(bx, theta, ev, &opts.reduction)? else {
        return Ok(Evaluated::Empty);
    };
    match bound(&reduced, theta, ev)? {
        BoundOutcome::Prune => Ok(Evaluated::Empty),
        BoundOutcome::Bounded { upper, incumbent } => Ok(Evaluated::Live { bx: reduced, upper, incumbent }),
    }
}

/// Global optimum of the joint beamforming and link-selection problem by
/// discrete branch-reduce-and-bound, using the default cone backend.
pub fn solve_dbrb(inst: &Instance, opts: &DbrbOptions) -> Result<SolveResult> {
    let solver = ClarabelSolver::with_tol(opts.solver_tol);
    solve_dbrb_with(inst, opts, &solver, None)
}

/// As [`solve_dbrb`], with an explicit backend and an optional known feasible
/// point (checked before use) to start from.
pub fn solve_dbrb_with(
    inst: &Instance,
    opts: &DbrbOptions,
    solver: &dyn ConeSolver,
    warm_start: Option<&Incumbent>,
) -> Result<SolveResult> {
    let start = Instant::now();
    let mut ev = Evaluator::new(inst, solver);
    ev.feasibility_tol = opts.feasibility_tol;

    let root = match compute_root_box(inst) {
        Ok(root) => root,
        Err(Error::InfeasibleInstance { .. }) => {
            return Ok(SolveResult {
                incumbent: None,
                upper: f64::NEG_INFINITY,
                lower: f64::NEG_INFINITY,
                trace: Vec::new(),
                termination: Termination::Infeasible,
                iterations: 0,
            })
        }
        Err(e) => return Err(e),
    };

    let mut best = Best { theta: inst.num_users() as f64 * inst.min_rate(), incumbent: None };
    if let Some(ws) = warm_start {
        if ws.check(inst, opts.feasibility_tol).is_feasible() {
            best.offer(Some(ws.clone()));
        } else {
            log::warn!("warm-start point is infeasible for this instance; ignored");
        }
    }
    if opts.heuristic_start {
        best.offer(heuristic_with(&ev)?);
    }

    let pool = if opts.threads > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(opts.threads)
                .build()
                .map_err(|e| Error::InvalidParam { name: "threads", reason: e.to_string() })?,
        )
    } else {
        None
    };

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_id = 0usize;
    if let Evaluated::Live { bx, upper, incumbent } = evaluate(&root, best.theta, &ev, opts)? {
        let local = incumbent.as_ref().map(|i| i.objective);
        best.offer(incumbent);
        heap.push(Node { bx, upper, local_lower: local, created: 0, id: next_id });
        next_id += 1;
    }

    let mut trace = Vec::new();
    let mut last_ub = f64::INFINITY;
    let mut record = |iter: usize, heap: &BinaryHeap<Node>, best: &Best, trace: &mut Vec<TraceRow>| -> f64 {
        let live_max = heap.peek().map_or(f64::NEG_INFINITY, |n| n.upper);
        let ub = last_ub.min(live_max.max(best.theta));
        last_ub = ub;
        let (socp, feas) = ev.counts();
        trace.push(TraceRow {
            iter,
            ub,
            lb: best.theta,
            live_boxes: heap.len(),
            socp_solves: socp,
            feas_solves: feas,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        ub
    };

    heap.retain(|n| n.upper >= best.theta);
    let mut ub = record(0, &heap, &best, &mut trace);
    let mut iter = 0usize;
    let termination = loop {
        let gap = ub - best.theta;
        if heap.is_empty() {
            break Termination::Exhausted;
        }
        if gap <= opts.eps_abs || gap / ub.abs().max(1.0) <= opts.eps_rel {
            break Termination::Converged;
        }
        if iter >= opts.max_iter {
            break Termination::IterationLimit;
        }
        iter += 1;

        let parent = heap.pop().expect("heap is nonempty");
        let Some((left, right)) = branch(&parent.bx) else {
            // Unsplittable box: its bound is already exact at the vertex probe.
            ub = record(iter, &heap, &best, &mut trace);
            continue;
        };
        let theta = best.theta;
        let (a, b) = match &pool {
            Some(pool) => pool.install(|| {
                rayon::join(|| evaluate(&left, theta, &ev, opts), || evaluate(&right, theta, &ev, opts))
            }),
            None => (evaluate(&left, theta, &ev, opts), evaluate(&right, theta, &ev, opts)),
        };
        for child in [a?, b?] {
            if let Evaluated::Live { bx, upper, incumbent } = child {
                let local = incumbent.as_ref().map(|i| i.objective);
                best.offer(incumbent);
                let upper = upper.min(parent.upper);
                heap.push(Node { bx, upper, local_lower: local, created: iter, id: next_id });
                next_id += 1;
            }
        }
        heap.retain(|n| n.upper >= best.theta);
        ub = record(iter, &heap, &best, &mut trace);
    };

    let termination = match (termination, &best.incumbent) {
        (Termination::Exhausted, None) => Termination::Infeasible,
        (t, _) => t,
    };
    let (upper, lower) = match termination {
        Termination::Infeasible => (f64::NEG_INFINITY, f64::NEG_INFINITY),
        Termination::Exhausted => (best.theta, best.theta),
        _ => (ub, best.theta),
    };
    Ok(SolveResult { incumbent: best.incumbent, upper, lower, trace, termination, iterations: iter })
}
