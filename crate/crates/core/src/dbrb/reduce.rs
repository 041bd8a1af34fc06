//! Box reduction: shrink `[p, q]` without losing any feasible point whose sum
//! rate reaches the current best objective.

use serde::{Deserialize, Serialize};

use super::membership::{box_admits_rates, Evaluator};
use crate::error::{Error, Result};
use crate::search_box::SearchBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionOptions {
    /// Bisection stops once the bracket is this fraction of the edge.
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-3, max_steps: 20 }
    }
}

/// Raises each rate lower vertex to `theta − Σ_{j≠k} q_j`. The objective is
/// linear, so this is the exact cut. Returns false if the box empties.
fn objective_cut(bx: &mut SearchBox, theta: f64) -> bool {
    let nl = bx.num_links();
    let total = bx.objective_upper();
    for k in 0..bx.num_users() {
        let i = nl + k;
        let (p, q) = (bx.lower()[i], bx.upper()[i]);
        let floor = theta - (total - q);
        if floor > p {
            if floor > q + 1e-12 * q.abs().max(1.0) {
                return false;
            }
            bx.set_lower(i, floor.min(q));
        }
    }
    true
}

fn log_failure(what: &str, e: &Error) {
    log::debug!("reduction probe for {what} left unreduced: {e}");
}

/// Reduced box `re([p, q])`, or `None` when the box provably contains no
/// feasible point with objective at least `theta`.
///
/// Guarantee: every `s ∈ [p, q] ∩ S` with `f(s) >= theta` lies in the output.
/// Probes that fail numerically leave their coordinate untouched.
pub fn reduce(bx: &SearchBox, theta: f64, ev: &Evaluator<'_>, opts: &ReductionOptions) -> Result<Option<SearchBox>> {
    let inst = ev.instance();
    let (nb, nk, nl) = (inst.num_bs(), inst.num_users(), inst.num_links());
    let mut out = bx.clone();

    if !objective_cut(&mut out, theta) {
        return Ok(None);
    }

    // Link coordinates: pin x_i when one of its two faces holds nothing useful.
    for i in 0..nl {
        if out.lower()[i] == out.upper()[i] {
            continue;
        }
        let off_ok = match ev.relaxation_admits(&out.with_link_fixed(i, 0.0), theta) {
            Ok(v) => v,
            Err(e) => {
                log_failure("link face 0", &e);
                true
            }
        };
        let on_ok = match ev.relaxation_admits(&out.with_link_fixed(i, 1.0), theta) {
            Ok(v) => v,
            Err(e) => {
                log_failure("link face 1", &e);
                true
            }
        };
        match (off_ok, on_ok) {
            (false, false) => return Ok(None),
            (false, true) => out.set_lower(i, 1.0),
            (true, false) => out.set_upper(i, 0.0),
            (true, true) => {}
        }
    }
    if (0..nk).any(|k| (0..nb).all(|b| out.upper()[b * nk + k] == 0.0)) {
        return Ok(None);
    }

    // Rate coordinates: lower the upper vertex along each axis from p.
    let base: Vec<f64> = out.z_lower().to_vec();
    match box_admits_rates(ev, &out, &base) {
        Ok(false) => return Ok(None),
        Ok(true) => {
            for k in 0..nk {
                let i = nl + k;
                let (lo0, hi0) = (base[k], out.upper()[i]);
                if hi0 <= lo0 {
                    continue;
                }
                let mut probe = base.clone();
                probe[k] = hi0;
                match box_admits_rates(ev, &out, &probe) {
                    Ok(true) => continue,
                    Ok(false) => {}
                    Err(e) => {
                        log_failure("rate edge", &e);
                        continue;
                    }
                }
                let (mut lo, mut hi) = (lo0, hi0);
                let width = opts.rel_tol * (hi0 - lo0);
                let mut steps = 0;
                let mut failed = false;
                while hi - lo > width && steps < opts.max_steps {
                    let mid = 0.5 * (lo + hi);
                    probe[k] = mid;
                    match box_admits_rates(ev, &out, &probe) {
                        Ok(true) => lo = mid,
                        Ok(false) => hi = mid,
                        Err(e) => {
                            log_failure("rate bisection", &e);
                            failed = true;
                            break;
                        }
                    }
                    steps += 1;
                }
                if !failed {
                    // `hi` is infeasible, so nothing in the box has z_k >= hi
                    out.set_upper(i, hi);
                }
            }
        }
        Err(e) => log_failure("lower vertex", &e),
    }

    if !objective_cut(&mut out, theta) {
        return Ok(None);
    }
    Ok(Some(out))
}
