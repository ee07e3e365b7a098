//! Direct elimination for first-step systems of nearest-neighbour chains on
//! trees.
//!
//! Solves `h(v) = f(v) + sum_w P(v, w) h(w)` off a boundary set, with `h`
//! prescribed on the boundary. Rooting the tree at a boundary vertex, each
//! vertex is eliminated after its subtree as `h(v) = a(v) + b(v) h(parent)`,
//! which costs O(n) with no fill-in. Instead of `b` the solver tracks
//! `g = 1 - b`, the chance of being stopped inside the subtree, so no
//! denominator is formed by cancellation.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::trees::RootedTree;

pub(crate) const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Transition probabilities out of one vertex: `up` to the parent and `down`
/// to each child. `absorbing` rows stay put forever.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Row {
    pub up: f64,
    pub down: f64,
    pub absorbing: bool,
}

impl Row {
    pub fn prob(&self, tree: &RootedTree, v: usize, w: usize) -> f64 {
        if self.absorbing {
            return if v == w { 1.0 } else { 0.0 };
        }
        if tree.parent(v) == Some(w) {
            self.up
        } else if tree.parent(w) == Some(v) {
            self.down
        } else {
            0.0
        }
    }
}

/// Returns `h`; entries are `+inf` where the boundary is not reached a.s.
/// from `v` and `f > 0` along the way.
pub(crate) fn solve(
    tree: &RootedTree,
    rows: &[Row],
    boundary: &[Option<f64>],
    rhs: &[f64],
) -> Result<Vec<f64>> {
    let n = tree.len();
    debug_assert!(rows.len() == n && boundary.len() == n && rhs.len() == n);
    let root = boundary
        .iter()
        .position(Option::is_some)
        .ok_or_else(|| Error::Singular("no boundary vertex".into()))?;

    // Breadth-first order from the elimination root over the undirected tree.
    let mut order = Vec::with_capacity(n);
    let mut elim_parent = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for w in tree.neighbours(v) {
            if !seen[w] {
                seen[w] = true;
                elim_parent[w] = v;
                queue.push_back(w);
            }
        }
    }

    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut g = vec![1.0; n];
    let mut infinite = vec![false; n];
    // Accumulators from eliminated neighbours: sum P(v,c) a(c), sum P(v,c) g(c).
    let mut acc_a = vec![0.0; n];
    let mut acc_g = vec![0.0; n];

    for &v in order.iter().rev() {
        let p = elim_parent[v];
        if let Some(val) = boundary[v] {
            a[v] = val;
            b[v] = 0.0;
            g[v] = 1.0;
        } else if rows[v].absorbing || infinite[v] {
            infinite[v] = true;
        } else {
            let up = if p == usize::MAX { 0.0 } else { rows[v].prob(tree, v, p) };
            let denom = up + acc_g[v];
            if denom <= 0.0 {
                infinite[v] = true;
            } else {
                a[v] = (rhs[v] + acc_a[v]) / denom;
                b[v] = up / denom;
                g[v] = acc_g[v] / denom;
            }
        }
        if p == usize::MAX || boundary[p].is_some() {
            continue;
        }
        let pv = rows[p].prob(tree, p, v);
        if pv > 0.0 {
            if infinite[v] {
                infinite[p] = true;
            } else {
                acc_a[p] += pv * a[v];
                acc_g[p] += pv * g[v];
            }
        }
    }

    let mut h = vec![0.0; n];
    for &v in &order {
        let p = elim_parent[v];
        h[v] = if let Some(val) = boundary[v] {
            val
        } else if infinite[v] || (b[v] > 0.0 && h[p].is_infinite()) {
            f64::INFINITY
        } else if b[v] > 0.0 {
            a[v] + b[v] * h[p]
        } else {
            a[v]
        };
    }

    check_residual(tree, rows, boundary, rhs, &h)?;
    Ok(h)
}

fn check_residual(
    tree: &RootedTree,
    rows: &[Row],
    boundary: &[Option<f64>],
    rhs: &[f64],
    h: &[f64],
) -> Result<()> {
    let mut worst = 0.0_f64;
    for v in 0..tree.len() {
        if boundary[v].is_some() || !h[v].is_finite() || rows[v].absorbing {
            continue;
        }
        let mut s = rhs[v];
        let mut scale = 1.0 + h[v].abs();
        for w in tree.neighbours(v) {
            let pw = rows[v].prob(tree, v, w);
            if pw > 0.0 {
                s += pw * h[w];
                scale = scale.max(pw * h[w].abs());
            }
        }
        worst = worst.max((h[v] - s).abs() / scale);
    }
    if worst > RESIDUAL_TOLERANCE {
        return Err(Error::Residual { residual: worst, tolerance: RESIDUAL_TOLERANCE });
    }
    Ok(())
}
