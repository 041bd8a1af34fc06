//! Complex-to-real lowering. Complex vectors are stored as interleaved
//! `(re, im)` pairs, so `|h · w|` becomes the 2-norm of two real linear forms
//! and `Im(h · w) = 0` a single equality row.

use num_complex::Complex64;

use super::program::LinExpr;

/// Real and imaginary parts of `h · w`, where `w` occupies the interleaved
/// variables `offset, offset + 1, …`.
pub fn complex_product(h: &[Complex64], offset: usize) -> (LinExpr, LinExpr) {
    let mut re = LinExpr::default();
    let mut im = LinExpr::default();
    for (i, c) in h.iter().enumerate() {
        let (wr, wi) = (offset + 2 * i, offset + 2 * i + 1);
        re.terms.push((wr, c.re));
        re.terms.push((wi, -c.im));
        im.terms.push((wr, c.im));
        im.terms.push((wi, c.re));
    }
    (re, im)
}

/// Rows `(t, Re c, Im c)` of the three-dimensional cone `|c| <= t`.
pub fn modulus_rows(t: LinExpr, c: (LinExpr, LinExpr)) -> [LinExpr; 3] {
    [t, c.0, c.1]
}

pub fn interleave(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn deinterleave(v: &[f64]) -> Vec<Complex64> {
    v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}
