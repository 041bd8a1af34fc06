//! The two SOCP subproblems of the search: the per-box upper-bound relaxation
//! and the fixed-selection feasibility check.
//!
//! Both are built over normalized quantities (channels scaled so the noise
//! power is one, powers as fractions of the per-BS budget) and converted back
//! to physical units on extraction.

use num_complex::Complex64;

use super::envelope::envelope_pieces;
use super::program::{ConeProgram, LinExpr, ProgramBuilder, VarLayout};
use super::realify::complex_product;
use crate::error::{Error, Result};
use crate::problem::{Beamformer, Instance, SelectionVector, SoftPower};
use crate::search_box::SearchBox;

#[derive(Debug, Clone, Copy, PartialEq)]
enum LinkState {
    Off,
    On,
    Relaxed,
}

/// What the feasibility program optimizes once feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeasibilityGoal {
    /// Zero objective: any point satisfying the constraints.
    #[default]
    Find,
    /// Minimize total transmit power; rate constraints end up tight.
    MinPower,
}

/// SINR coefficient for a rate lower bound `z`: `e^z − 1`, never below the
/// SINR target.
fn sinr_coefficient(inst: &Instance, z: f64) -> f64 {
    z.exp_m1().max(inst.params().sinr_target)
}

fn add_link_constraints(
    builder: &mut ProgramBuilder,
    inst: &Instance,
    layout: &VarLayout,
    states: &[LinkState],
    rate_floor: &[f64],
) {
    let (nb, nk, m) = (inst.num_bs(), inst.num_users(), inst.antennas());

    for b in 0..nb {
        for k in 0..nk {
            let i = b * nk + k;
            let u = layout.u + i;
            let x_expr = match (states[i], layout.x) {
                (LinkState::Off, _) => {
                    for a in 0..m {
                        let re = layout.w_re(k, b * m + a);
                        builder.zero(LinExpr::var(re));
                        builder.zero(LinExpr::var(re + 1));
                    }
                    builder.zero(LinExpr::var(u));
                    continue;
                }
                (LinkState::Relaxed, Some(xs)) => LinExpr::var(xs + i),
                _ => LinExpr::constant(1.0),
            };
            // ‖(w_bk, (x - u)/2)‖ <= (x + u)/2  <=>  ‖w_bk‖² <= x u
            let head = x_expr.clone().scaled(0.5).add(u, 0.5);
            let mut tail = Vec::with_capacity(2 * m + 1);
            for a in 0..m {
                let re = layout.w_re(k, b * m + a);
                tail.push(LinExpr::var(re));
                tail.push(LinExpr::var(re + 1));
            }
            tail.push(x_expr.scaled(0.5).add(u, -0.5));
            builder.soc(head, &tail);
        }
        let mut budget = LinExpr::constant(1.0);
        for k in 0..nk {
            budget = budget.add(layout.u + b * nk + k, -1.0);
        }
        builder.nonneg(budget);
    }

    for k in 0..nk {
        let g = inst.normalized_channel(k);
        let root_c = sinr_coefficient(inst, rate_floor[k]).sqrt();
        let (sig_re, sig_im) = complex_product(g, layout.w_re(k, 0));
        builder.zero(sig_im);
        let mut tail = Vec::with_capacity(2 * nk);
        for j in (0..nk).filter(|&j| j != k) {
            let (re, im) = complex_product(g, layout.w_re(j, 0));
            tail.push(re.scaled(root_c));
            tail.push(im.scaled(root_c));
        }
        tail.push(LinExpr::constant(root_c));
        builder.soc(sig_re, &tail);
    }
}

fn check_box(bx: &SearchBox, inst: &Instance) -> Result<()> {
    if bx.num_links() != inst.num_links() || bx.num_users() != inst.num_users() {
        return Err(Error::MalformedBox(format!(
            "box has {} links / {} users, instance has {} / {}",
            bx.num_links(),
            bx.num_users(),
            inst.num_links(),
            inst.num_users()
        )));
    }
    Ok(())
}

fn bounded_var(builder: &mut ProgramBuilder, idx: usize, lo: f64, hi: f64) {
    if lo == hi {
        builder.zero(LinExpr::var(idx).plus(-lo));
    } else {
        builder.nonneg(LinExpr::var(idx).plus(-lo));
        builder.nonneg(LinExpr::term(idx, -1.0).plus(hi));
    }
}

/// Upper-bound relaxation over a box: maximize `Σ z` with the link variables
/// relaxed to `[x_lower, x_upper]`, the rate constraints taken at the box's
/// lower rates, the backhaul constraint replaced by its envelope, and the
/// objective bracketed between `theta` and the box's upper objective.
pub fn build_bound_program(bx: &SearchBox, inst: &Instance, theta: f64) -> Result<ConeProgram> {
    check_box(bx, inst)?;
    if !theta.is_finite() {
        return Err(Error::MalformedBox(format!("objective threshold {theta}")));
    }
    let (nb, nk, nl) = (inst.num_bs(), inst.num_users(), inst.num_links());
    let layout = VarLayout::new(inst.params().aggregate_len(), nk, nl, true);
    let (xs, zs) = (layout.x.unwrap(), layout.z.unwrap());
    let mut builder = ProgramBuilder::new(layout.total).with_layout(layout.clone());

    let states: Vec<LinkState> = (0..nl)
        .map(|i| match (bx.x_lower()[i], bx.x_upper()[i]) {
            (_, 0.0) => LinkState::Off,
            (1.0, _) => LinkState::On,
            _ => LinkState::Relaxed,
        })
        .collect();
    for i in 0..nl {
        bounded_var(&mut builder, xs + i, bx.x_lower()[i], bx.x_upper()[i]);
    }
    for k in 0..nk {
        bounded_var(&mut builder, zs + k, bx.z_lower()[k], bx.z_upper()[k]);
        builder.set_objective(zs + k, -1.0);
    }
    for k in 0..nk {
        let mut served = LinExpr::constant(-1.0);
        for b in 0..nb {
            served = served.add(xs + b * nk + k, 1.0);
        }
        builder.nonneg(served);
    }
    let mut total = LinExpr::default();
    for k in 0..nk {
        total = total.add(zs + k, 1.0);
    }
    builder.nonneg(total.clone().plus(-theta));
    builder.nonneg(total.scaled(-1.0).plus(bx.objective_upper()));
    let cap = inst.params().backhaul_cap;
    for b in 0..nb {
        for piece in envelope_pieces(bx, b, &layout) {
            builder.nonneg(piece.scaled(-1.0).plus(cap));
        }
    }
    add_link_constraints(&mut builder, inst, &layout, &states, bx.z_lower());
    Ok(builder.finish())
}

/// Feasibility of a fixed selection at rate floors `rates`: does some
/// beamformer meet every rate with the given links and per-BS powers?
///
/// Returns `None` when the selection leaves a user unserved, which is
/// infeasible without solving anything.
pub fn build_feasibility_program(
    selection: &SelectionVector,
    rates: &[f64],
    inst: &Instance,
    goal: FeasibilityGoal,
) -> Option<ConeProgram> {
    let (nb, nk, nl) = (inst.num_bs(), inst.num_users(), inst.num_links());
    assert_eq!(selection.0.len(), nl, "selection length");
    assert_eq!(rates.len(), nk, "rate vector length");
    if !selection.connects_all(nb, nk) {
        return None;
    }
    let layout = VarLayout::new(inst.params().aggregate_len(), nk, nl, false);
    let mut builder = ProgramBuilder::new(layout.total).with_layout(layout.clone());
    let states: Vec<LinkState> =
        selection.0.iter().map(|&on| if on { LinkState::On } else { LinkState::Off }).collect();
    if goal == FeasibilityGoal::MinPower {
        for i in 0..nl {
            builder.set_objective(layout.u + i, 1.0);
        }
    }
    add_link_constraints(&mut builder, inst, &layout, &states, rates);
    Some(builder.finish())
}

/// Physical beamformer from a primal vector.
pub fn beamformer_from_primal(inst: &Instance, layout: &VarLayout, v: &[f64]) -> Beamformer {
    let scale = inst.params().power_budget_w.sqrt();
    let n = layout.aggregate_len;
    let columns = (0..layout.num_users)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let re = layout.w_re(k, i);
                    Complex64::new(v[re], v[re + 1]) * scale
                })
                .collect()
        })
        .collect();
    Beamformer::from_columns(columns).expect("layout columns share a length")
}

/// Physical soft powers from a primal vector.
pub fn soft_power_from_primal(inst: &Instance, layout: &VarLayout, v: &[f64]) -> SoftPower {
    let p = inst.params().power_budget_w;
    SoftPower(v[layout.u..layout.u + layout.num_links].iter().map(|u| u * p).collect())
}

pub fn rates_from_primal(layout: &VarLayout, v: &[f64]) -> Option<Vec<f64>> {
    layout.z.map(|z| v[z..z + layout.num_users].to_vec())
}

pub fn selection_from_primal(layout: &VarLayout, v: &[f64]) -> Option<Vec<f64>> {
    layout.x.map(|x| v[x..x + layout.num_links].to_vec())
}
