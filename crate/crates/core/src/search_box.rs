use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]` over `s = (x, z)`.
///
/// The first `num_links` coordinates are the link-selection variables and
/// both vertices keep them in `{0, 1}`; the remaining coordinates are the
/// per-user rates in nats per channel use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    num_links: usize,
}

fn is_bit(v: f64) -> bool {
    v == 0.0 || v == 1.0
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, num_links: usize) -> Result<Self> {
        if lower.len() != upper.len() || num_links > lower.len() {
            return Err(Error::MalformedBox(format!(
                "vertex lengths {} / {} with {num_links} Boolean coordinates",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (&p, &q)) in lower.iter().zip(&upper).enumerate() {
            if !(p.is_finite() && q.is_finite()) || p > q {
                return Err(Error::MalformedBox(format!("coordinate {i}: [{p}, {q}]")));
            }
            if i < num_links && !(is_bit(p) && is_bit(q)) {
                return Err(Error::MalformedBox(format!("Boolean coordinate {i} has vertex values {p}, {q}")));
            }
        }
        Ok(Self { lower, upper, num_links })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn num_users(&self) -> usize {
        self.lower.len() - self.num_links
    }

    pub fn x_lower(&self) -> &[f64] {
        &self.lower[..self.num_links]
    }

    pub fn x_upper(&self) -> &[f64] {
        &self.upper[..self.num_links]
    }

    pub fn z_lower(&self) -> &[f64] {
        &self.lower[self.num_links..]
    }

    pub fn z_upper(&self) -> &[f64] {
        &self.upper[self.num_links..]
    }

    pub fn is_boolean(&self, i: usize) -> bool {
        i < self.num_links
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Objective at the upper vertex, an upper bound on the sum rate in the box.
    pub fn objective_upper(&self) -> f64 {
        self.z_upper().iter().sum()
    }

    pub fn objective_lower(&self) -> f64 {
        self.z_lower().iter().sum()
    }

    /// True when every link variable is pinned.
    pub fn selection_fixed(&self) -> bool {
        self.x_lower() == self.x_upper()
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&s, (&p, &q))| s >= p - tol && s <= q + tol)
    }

    pub fn is_subset_of(&self, other: &SearchBox, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| {
                self.lower[i] >= other.lower[i] - tol && self.upper[i] <= other.upper[i] + tol
            })
    }

    pub(crate) fn set_lower(&mut self, i: usize, v: f64) {
        self.lower[i] = v;
    }

    pub(crate) fn set_upper(&mut self, i: usize, v: f64) {
        self.upper[i] = v;
    }

    /// Copy with Boolean coordinate `i` pinned to `value`.
    pub(crate) fn with_link_fixed(&self, i: usize, value: f64) -> SearchBox {
        let mut out = self.clone();
        out.lower[i] = value;
        out.upper[i] = value;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_vertices() {
        assert!(SearchBox::new(vec![0.0, 1.0], vec![1.0, 0.5], 1).is_err());
        assert!(SearchBox::new(vec![0.5, 1.0], vec![1.0, 2.0], 1).is_err());
        assert!(SearchBox::new(vec![0.0], vec![1.0, 2.0], 1).is_err());
        let b = SearchBox::new(vec![0.0, 0.5], vec![1.0, 2.0], 1).unwrap();
        assert_eq!(b.objective_upper(), 2.0);
        assert_eq!(b.edge(0), 1.0);
        assert!(b.contains(&[1.0, 1.0], 0.0));
        assert!(!b.contains(&[1.0, 2.5], 0.0));
    }
}
