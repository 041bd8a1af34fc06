//! Convex underestimator of the backhaul load `Σ_k x_{b,k} z_k` over a box:
//! the larger of the two McCormick planes through the lower and the upper
//! vertex.

use super::program::{LinExpr, VarLayout};
use crate::search_box::SearchBox;

/// `φ_b(x, z)` for BS `b`; `x` is the full link vector and `z` the rates.
pub fn envelope_phi(x: &[f64], z: &[f64], bx: &SearchBox, b: usize) -> f64 {
    let nk = bx.num_users();
    let (xl, xu, zl, zu) = (bx.x_lower(), bx.x_upper(), bx.z_lower(), bx.z_upper());
    let mut lo = 0.0;
    let mut hi = 0.0;
    for k in 0..nk {
        let i = b * nk + k;
        lo += zl[k] * x[i] + xl[i] * z[k] - xl[i] * zl[k];
        hi += zu[k] * x[i] + xu[i] * z[k] - xu[i] * zu[k];
    }
    lo.max(hi)
}

/// The two affine pieces of `φ_b` over the program variables.
pub fn envelope_pieces(bx: &SearchBox, b: usize, layout: &VarLayout) -> [LinExpr; 2] {
    let nk = bx.num_users();
    let (xs, zs) = (layout.x.expect("layout without x"), layout.z.expect("layout without z"));
    let (xl, xu, zl, zu) = (bx.x_lower(), bx.x_upper(), bx.z_lower(), bx.z_upper());
    let mut lo = LinExpr::default();
    let mut hi = LinExpr::default();
    for k in 0..nk {
        let i = b * nk + k;
        lo = lo.add(xs + i, zl[k]).add(zs + k, xl[i]).plus(-xl[i] * zl[k]);
        hi = hi.add(xs + i, zu[k]).add(zs + k, xu[i]).plus(-xu[i] * zu[k]);
    }
    [lo, hi]
}
