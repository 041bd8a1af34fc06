use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::search_box::SearchBox;

/// A live box in the search tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub bx: SearchBox,
    pub upper: f64,
    /// Best verified objective found while bounding this box.
    pub local_lower: Option<f64>,
    /// Iteration at which the node was created.
    pub created: usize,
    pub id: usize,
}

impl Node {
    /// Selection priority: larger upper bound first, then earlier creation,
    /// then smaller id.
    pub fn priority_cmp(&self, other: &Node) -> Ordering {
        self.upper
            .total_cmp(&other.upper)
            .then_with(|| other.created.cmp(&self.created))
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority_cmp(other)
    }
}

/// Index of the node with the largest upper bound, or `None` for an empty set.
pub fn select_box(nodes: &[Node]) -> Option<usize> {
    nodes.iter().enumerate().max_by(|a, b| a.1.priority_cmp(b.1)).map(|(i, _)| i)
}

fn below_resolution(bx: &SearchBox, i: usize) -> bool {
    let scale = bx.upper()[i].abs().max(1.0);
    bx.edge(i) <= 4.0 * f64::EPSILON * scale
}

/// Splits along the longest edge (smallest index on ties). A Boolean edge
/// yields the two faces `x_j = 0` and `x_j = 1`; a rate edge is halved.
/// Returns `None` for a box that cannot be split any further.
pub fn branch(bx: &SearchBox) -> Option<(SearchBox, SearchBox)> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..bx.dim() {
        let e = bx.edge(i);
        if best.is_none_or(|(_, be)| e > be) {
            best = Some((i, e));
        }
    }
    let (j, _) = best?;
    if bx.edge(j) == 0.0 || (!bx.is_boolean(j) && below_resolution(bx, j)) {
        return None;
    }
    let mut left = bx.clone();
    let mut right = bx.clone();
    if bx.is_boolean(j) {
        left.set_upper(j, 0.0);
        right.set_lower(j, 1.0);
    } else {
        let mid = bx.lower()[j] + 0.5 * bx.edge(j);
        left.set_upper(j, mid);
        right.set_lower(j, mid);
    }
    Some((left, right))
}
