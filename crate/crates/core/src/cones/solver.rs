use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use serde::{Deserialize, Serialize};

use super::program::{Cone, ConeProgram};
use crate::error::{Error, Result};

/// Default accuracy for the subproblems solved inside the search.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeStatus {
    Optimal,
    /// A primal infeasibility certificate was found.
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solve_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSolution {
    pub status: ConeStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    pub stats: SolverStats,
}

impl ConeSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == ConeStatus::Optimal
    }
}

/// Contract for conic backends: optimal / infeasible / numerical-failure,
/// never a silent wrong answer, deterministic for identical input.
pub trait ConeSolver: Send + Sync {
    fn solve(&self, prog: &ConeProgram) -> Result<ConeSolution>;
}

/// Interior-point backend on top of Clarabel.
#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        Self { tol: DEFAULT_SOLVER_TOL, max_iter: 200 }
    }
}

impl ClarabelSolver {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

impl ConeSolver for ClarabelSolver {
    fn solve(&self, prog: &ConeProgram) -> Result<ConeSolution> {
        prog.validate()?;
        let n = prog.num_vars;
        let m = prog.num_rows();
        let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        for &(r, c, v) in &prog.triplets {
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
        let p = CscMatrix::zeros((n, n));
        let cones: Vec<SupportedConeT<f64>> = prog
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(d) => SupportedConeT::ZeroConeT(d),
                Cone::Nonnegative(d) => SupportedConeT::NonnegativeConeT(d),
                Cone::SecondOrder(d) => SupportedConeT::SecondOrderConeT(d),
            })
            .collect();
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_gap_abs(self.tol)
            .tol_gap_rel(self.tol)
            .tol_feas(self.tol)
            .build()
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &prog.objective, &a, &prog.offset, &cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => ConeStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => ConeStatus::Infeasible,
            _ => ConeStatus::NumericalFailure,
        };
        let primal = sol.x.clone();
        let objective = if status == ConeStatus::Optimal { prog.objective_value(&primal) } else { f64::NAN };
        Ok(ConeSolution {
            status,
            primal,
            objective,
            stats: SolverStats {
                iterations: sol.iterations,
                primal_residual: sol.r_prim,
                dual_residual: sol.r_dual,
                solve_time_s: sol.solve_time,
            },
        })
    }
}

/// Solves with the default backend at the given tolerance.
pub fn solve(prog: &ConeProgram, tol: f64) -> Result<ConeSolution> {
    ClarabelSolver::with_tol(tol).solve(prog)
}
