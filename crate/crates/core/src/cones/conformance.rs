//! Small cone programs with known answers, for checking a [`ConeSolver`].

use serde::{Deserialize, Serialize};

use super::program::{ConeProgram, LinExpr, ProgramBuilder};
use super::solver::{ConeSolver, ConeStatus};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expected {
    /// Optimal value, and the minimizer when it is unique.
    Optimal { objective: f64, x: Option<Vec<f64>> },
    Infeasible,
    /// Anything but `Optimal` (unbounded programs).
    NotOptimal,
}

#[derive(Debug, Clone)]
pub struct ConformanceCase {
    pub name: &'static str,
    pub program: ConeProgram,
    pub expected: Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub name: String,
    pub pass: bool,
    pub status: ConeStatus,
    pub detail: String,
}

fn v(i: usize) -> LinExpr {
    LinExpr::var(i)
}

fn c(x: f64) -> LinExpr {
    LinExpr::constant(x)
}

fn case(name: &'static str, b: ProgramBuilder, expected: Expected) -> ConformanceCase {
    ConformanceCase { name, program: b.finish(), expected }
}

fn optimal(objective: f64, x: Option<Vec<f64>>) -> Expected {
    Expected::Optimal { objective, x }
}

pub fn conformance_cases() -> Vec<ConformanceCase> {
    let mut out = Vec::new();
    let s2 = std::f64::consts::SQRT_2;

    let mut b = ProgramBuilder::new(1);
    b.set_objective(0, 1.0);
    b.nonneg(v(0).plus(-1.0));
    out.push(case("lp_lower_bound", b, optimal(1.0, Some(vec![1.0]))));

    let mut b = ProgramBuilder::new(2);
    b.set_objective(0, -1.0);
    b.set_objective(1, -2.0);
    b.nonneg(c(4.0).add(0, -1.0).add(1, -1.0));
    b.nonneg(c(3.0).add(0, -1.0));
    b.nonneg(c(2.0).add(1, -1.0));
    b.nonneg(v(0));
    out.push(case("lp_vertex", b, optimal(-6.0, Some(vec![2.0, 2.0]))));

    let mut b = ProgramBuilder::new(2);
    b.set_objective(0, 1.0);
    b.set_objective(1, 1.0);
    b.zero(v(0).plus(-2.0));
    b.zero(v(1).plus(1.0));
    out.push(case("equalities_only", b, optimal(1.0, Some(vec![2.0, -1.0]))));

    let mut b = ProgramBuilder::new(2);
    b.set_objective(0, -1.0);
    b.set_objective(1, -1.0);
    b.soc(c(1.0), &[v(0), v(1)]);
    out.push(case("unit_disk_corner", b, optimal(-s2, Some(vec![1.0 / s2, 1.0 / s2]))));

    let mut b = ProgramBuilder::new(1);
    b.set_objective(0, 1.0);
    b.soc(v(0), &[c(3.0), c(4.0)]);
    out.push(case("constant_norm", b, optimal(5.0, Some(vec![5.0]))));

    // distance from (1, 2) to the line x + y = 0
    let mut b = ProgramBuilder::new(3);
    b.set_objective(2, 1.0);
    b.soc(v(2), &[v(0).plus(-1.0), v(1).plus(-2.0)]);
    b.zero(v(0).add(1, 1.0));
    out.push(case("point_to_line", b, optimal(3.0 / s2, Some(vec![-0.5, 0.5, 3.0 / s2]))));

    // minimum-norm solution of x + 2y + 3z = 14
    let mut b = ProgramBuilder::new(4);
    b.set_objective(3, 1.0);
    b.soc(v(3), &[v(0), v(1), v(2)]);
    b.zero(v(0).add(1, 2.0).add(2, 3.0).plus(-14.0));
    out.push(case("min_norm", b, optimal(14f64.sqrt(), Some(vec![1.0, 2.0, 3.0, 14f64.sqrt()]))));

    // xy >= 1 as ‖(2, x − y)‖ <= x + y
    let mut b = ProgramBuilder::new(2);
    b.set_objective(0, 1.0);
    b.set_objective(1, 1.0);
    b.soc(v(0).add(1, 1.0), &[c(2.0), v(0).add(1, -1.0)]);
    out.push(case("rotated_hyperbola", b, optimal(2.0, Some(vec![1.0, 1.0]))));

    // x² <= t as ‖(2x, t − 1)‖ <= t + 1
    let mut b = ProgramBuilder::new(2);
    b.set_objective(1, 1.0);
    b.soc(v(1).plus(1.0), &[v(0).scaled(2.0), v(1).plus(-1.0)]);
    b.nonneg(v(0).plus(-2.0));
    out.push(case("quadratic_epigraph", b, optimal(4.0, Some(vec![2.0, 4.0]))));

    // Σ distances to (0, 0) and (4, 0): any point of the segment
    let mut b = ProgramBuilder::new(4);
    b.set_objective(2, 1.0);
    b.set_objective(3, 1.0);
    b.soc(v(2), &[v(0), v(1)]);
    b.soc(v(3), &[v(0).plus(-4.0), v(1)]);
    out.push(case("two_cones", b, optimal(4.0, None)));

    // SINR-type cone: single antenna, h = 2, noise 1, SINR >= 3, min power
    let mut b = ProgramBuilder::new(2);
    b.set_objective(1, 1.0);
    b.soc(v(0).scaled(2.0 / 3f64.sqrt()), &[c(1.0)]);
    b.soc(v(1).plus(1.0), &[v(0).scaled(2.0), v(1).plus(-1.0)]);
    out.push(case("sinr_min_power", b, optimal(0.75, Some(vec![0.75f64.sqrt(), 0.75]))));

    let mut b = ProgramBuilder::new(1);
    b.zero(v(0).plus(-5.0));
    out.push(case("feasibility_only", b, optimal(0.0, Some(vec![5.0]))));

    let mut b = ProgramBuilder::new(1);
    b.nonneg(v(0).plus(-1.0));
    b.nonneg(c(0.0).add(0, -1.0));
    out.push(case("lp_infeasible", b, Expected::Infeasible));

    let mut b = ProgramBuilder::new(1);
    b.set_objective(0, 1.0);
    b.soc(c(0.5), &[v(0), c(1.0)]);
    out.push(case("soc_infeasible", b, Expected::Infeasible));

    let mut b = ProgramBuilder::new(2);
    b.soc(c(1.0), &[v(0), v(1)]);
    b.zero(v(0).add(1, 1.0).plus(-2.0));
    out.push(case("disk_line_infeasible", b, Expected::Infeasible));

    let mut b = ProgramBuilder::new(1);
    b.zero(v(0).plus(-1.0));
    b.zero(v(0).plus(-2.0));
    out.push(case("inconsistent_equalities", b, Expected::Infeasible));

    let mut b = ProgramBuilder::new(3);
    b.soc(v(2), &[v(0), v(1)]);
    b.nonneg(c(-1.0).add(2, -1.0));
    out.push(case("cone_below_zero", b, Expected::Infeasible));

    let mut b = ProgramBuilder::new(1);
    b.set_objective(0, 1.0);
    b.nonneg(c(0.0).add(0, -1.0));
    out.push(case("unbounded", b, Expected::NotOptimal));

    out
}

fn scale(x: f64) -> f64 {
    x.abs().max(1.0)
}

/// Solves every case and compares with the known answer at `tol` (relative
/// for objectives, absolute for minimizers and feasibility).
pub fn run_conformance(solver: &dyn ConeSolver, tol: f64) -> Result<Vec<CaseOutcome>> {
    conformance_cases()
        .into_iter()
        .map(|case| {
            let sol = solver.solve(&case.program)?;
            let (pass, detail) = match (&case.expected, sol.status) {
                (Expected::Optimal { objective, x }, ConeStatus::Optimal) => {
                    let obj_err = (sol.objective - objective).abs() / scale(*objective);
                    let x_err = x.as_ref().map_or(0.0, |x| {
                        x.iter().zip(&sol.primal).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                    });
                    let viol = case.program.max_violation(&sol.primal);
                    (
                        obj_err <= tol && x_err <= tol && viol <= tol,
                        format!("objective error {obj_err:.2e}, minimizer error {x_err:.2e}, violation {viol:.2e}"),
                    )
                }
                (Expected::Infeasible, ConeStatus::Infeasible) => (true, "infeasibility certified".into()),
                (Expected::NotOptimal, s) if s != ConeStatus::Optimal => (true, format!("reported {s:?}")),
                (e, s) => (false, format!("expected {e:?}, got {s:?}")),
            };
            Ok(CaseOutcome { name: case.name.into(), pass, status: sol.status, detail })
        })
        .collect()
}
