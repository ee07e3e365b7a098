//! Biased random walks on finite trees and on Z: simulation, exact linear
//! solves and closed-form hitting quantities.
//!
//! A walk at a non-root vertex `x` with `d` children steps to the parent with
//! probability `1/(1 + beta d)` and to each child with `beta/(1 + beta d)`.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::solve::{self, Row};
use crate::trees::{BranchTree, RootedTree, ROOT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// The root steps to a uniform child.
    RootReflecting,
    /// Tree root is `rho_bar` (absorbing); `rho` steps to it with
    /// probability `(beta + 1)/(beta (c + 1) + 1)`.
    AncestorAbsorbing,
}

#[derive(Debug, Clone, Copy)]
pub struct WalkKernel<'a> {
    tree: &'a RootedTree,
    beta: f64,
    mode: KernelMode,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("bias {beta} must be positive and finite")))
    }
}

fn check_beta_above_one(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("closed form needs beta > 1, got {beta}")))
    }
}

impl<'a> WalkKernel<'a> {
    pub fn root_reflecting(tree: &'a RootedTree, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(WalkKernel { tree, beta, mode: KernelMode::RootReflecting })
    }

    pub fn ancestor_absorbing(branch: &'a BranchTree, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(WalkKernel { tree: branch.tree(), beta, mode: KernelMode::AncestorAbsorbing })
    }

    pub fn tree(&self) -> &RootedTree {
        self.tree
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn is_absorbing(&self, x: usize) -> bool {
        self.row(x).absorbing
    }

    pub(crate) fn row(&self, x: usize) -> Row {
        let d = self.tree.num_children(x) as f64;
        let beta = self.beta;
        match (self.mode, x) {
            (KernelMode::RootReflecting, ROOT) | (KernelMode::AncestorAbsorbing, BranchTree::RHO_BAR) => {
                if self.mode == KernelMode::AncestorAbsorbing || d == 0.0 {
                    Row { up: 0.0, down: 0.0, absorbing: true }
                } else {
                    Row { up: 0.0, down: 1.0 / d, absorbing: false }
                }
            }
            (KernelMode::AncestorAbsorbing, BranchTree::RHO) => {
                let z = beta * (d + 1.0) + 1.0;
                Row { up: (beta + 1.0) / z, down: beta / z, absorbing: false }
            }
            _ => {
                let z = 1.0 + beta * d;
                Row { up: 1.0 / z, down: beta / z, absorbing: false }
            }
        }
    }

    fn rows(&self) -> Vec<Row> {
        (0..self.tree.len()).map(|x| self.row(x)).collect()
    }

    /// Non-zero transition probabilities out of `x`, parent first.
    pub fn transition_row(&self, x: usize) -> Vec<(usize, f64)> {
        let row = self.row(x);
        if row.absorbing {
            return vec![(x, 1.0)];
        }
        let mut out = Vec::with_capacity(self.tree.num_children(x) + 1);
        if let Some(p) = self.tree.parent(x) {
            if row.up > 0.0 {
                out.push((p, row.up));
            }
        }
        out.extend(self.tree.children(x).iter().map(|&c| (c, row.down)));
        out
    }

    /// All transition rows as `from,to,probability` CSV.
    pub fn transition_csv(&self) -> String {
        let mut out = String::from("from,to,probability\n");
        for x in 0..self.tree.len() {
            for (y, p) in self.transition_row(x) {
                let _ = writeln!(out, "{x},{y},{p:.17e}");
            }
        }
        out
    }

    /// One step from `x` using a single uniform draw.
    pub fn step<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let row = self.row(x);
        if row.absorbing {
            return x;
        }
        let children = self.tree.children(x);
        let u: f64 = rng.random();
        if u < row.up {
            return self.tree.parent(x).expect("up move needs a parent");
        }
        let i = ((u - row.up) / row.down) as usize;
        children[i.min(children.len() - 1)]
    }
}

pub fn transition_row(kernel: &WalkKernel<'_>, x: usize) -> Vec<(usize, f64)> {
    kernel.transition_row(x)
}

/// Steps of the ancestor-absorbing walk from `rho` until it first hits
/// `rho_bar`.
pub fn simulate_excursion<R: Rng + ?Sized>(branch: &BranchTree, beta: f64, rng: &mut R) -> Result<u64> {
    Ok(simulate_excursion_detail(branch, beta, rng)?.steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Excursion {
    pub steps: u64,
    /// Returns to `rho` before absorption.
    pub returns: u64,
}

pub fn simulate_excursion_detail<R: Rng + ?Sized>(branch: &BranchTree, beta: f64, rng: &mut R) -> Result<Excursion> {
    let kernel = WalkKernel::ancestor_absorbing(branch, beta)?;
    let mut x = BranchTree::RHO;
    let mut steps = 0;
    let mut returns = 0;
    while x != BranchTree::RHO_BAR {
        x = kernel.step(x, rng);
        steps += 1;
        if x == BranchTree::RHO {
            returns += 1;
        }
    }
    Ok(Excursion { steps, returns })
}

/// Expected hitting times of `targets` and the chance of reaching them
/// before any absorbing vertex, for every start vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingSolve {
    pub expected_time: Vec<f64>,
    pub probability: Vec<f64>,
}

impl HittingSolve {
    pub fn new(kernel: &WalkKernel<'_>, targets: &[usize]) -> Result<Self> {
        let tree = kernel.tree();
        let rows = kernel.rows();
        let n = tree.len();
        if targets.is_empty() {
            return Err(Error::Singular("empty target set".into()));
        }
        let mut time_boundary = vec![None; n];
        let mut prob_boundary = vec![None; n];
        for &t in targets {
            time_boundary[t] = Some(0.0);
            prob_boundary[t] = Some(1.0);
        }
        for (x, row) in rows.iter().enumerate() {
            if row.absorbing && prob_boundary[x].is_none() {
                prob_boundary[x] = Some(0.0);
            }
        }
        let expected_time = solve::solve(tree, &rows, &time_boundary, &vec![1.0; n])?;
        let probability = solve::solve(tree, &rows, &prob_boundary, &vec![0.0; n])?;
        Ok(HittingSolve { expected_time, probability })
    }
}

/// `E_start[tau_target]` from the first-step equations.
pub fn expected_hitting_time(kernel: &WalkKernel<'_>, start: usize, target: usize) -> Result<f64> {
    if start == target {
        return Ok(0.0);
    }
    let n = kernel.tree().len();
    let mut boundary = vec![None; n];
    boundary[target] = Some(0.0);
    let h = solve::solve(kernel.tree(), &kernel.rows(), &boundary, &vec![1.0; n])?;
    if h[start].is_finite() {
        Ok(h[start])
    } else {
        Err(Error::Singular(format!("vertex {target} is not reached a.s. from {start}")))
    }
}

/// `P_start(tau_hit < tau_avoid)`.
pub fn hitting_probability(kernel: &WalkKernel<'_>, start: usize, hit: &[usize], avoid: &[usize]) -> Result<f64> {
    let n = kernel.tree().len();
    let mut boundary = vec![None; n];
    for &a in avoid {
        boundary[a] = Some(0.0);
    }
    for &h in hit {
        boundary[h] = Some(1.0);
    }
    let h = solve::solve(kernel.tree(), &kernel.rows(), &boundary, &vec![0.0; n])?;
    Ok(h[start])
}

/// Expected visits to `y` (time 0 included) before the walk from `start`
/// enters `stop`.
pub fn expected_visits(kernel: &WalkKernel<'_>, start: usize, y: usize, stop: &[usize]) -> Result<f64> {
    let n = kernel.tree().len();
    let mut boundary = vec![None; n];
    for &s in stop {
        boundary[s] = Some(0.0);
    }
    let mut rhs = vec![0.0; n];
    rhs[y] = 1.0;
    Ok(solve::solve(kernel.tree(), &kernel.rows(), &boundary, &rhs)?[start])
}

/// `E_rho[tau_rho^+]` for the root-reflecting walk, by linear solve.
pub fn expected_return_time(tree: &RootedTree, beta: f64) -> Result<f64> {
    let kernel = WalkKernel::root_reflecting(tree, beta)?;
    let d = tree.num_children(ROOT);
    if d == 0 {
        return Err(Error::DegenerateTree("root has no children".into()));
    }
    let times = HittingSolve::new(&kernel, &[ROOT])?.expected_time;
    Ok(1.0 + tree.children(ROOT).iter().map(|&c| times[c]).sum::<f64>() / d as f64)
}

/// `E_rho[tau_rho^+] = 2 sum_{n >= 1} Z_n beta^{n-1} / Z_1`.
pub fn expected_return_time_formula(tree: &RootedTree, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let z = tree.generation_sizes();
    if z.len() < 2 || z[1] == 0 {
        return Err(Error::DegenerateTree("Z_1 = 0".into()));
    }
    let s: f64 = z.iter().enumerate().skip(1).map(|(n, &zn)| zn as f64 * beta.powi(n as i32 - 1)).sum();
    Ok(2.0 * s / z[1] as f64)
}

/// `E_rho[(tau_rho^+)^2]` from the two-stage first-step system
/// `t = 1 + Q t`, `s = 1 + 2 Q t + Q s`, independent of visit counts.
pub fn return_time_second_moment(tree: &RootedTree, beta: f64) -> Result<f64> {
    let kernel = WalkKernel::root_reflecting(tree, beta)?;
    let d = tree.num_children(ROOT);
    if d == 0 {
        return Err(Error::DegenerateTree("root has no children".into()));
    }
    let rows = kernel.rows();
    let n = tree.len();
    let mut boundary = vec![None; n];
    boundary[ROOT] = Some(0.0);
    let t = solve::solve(tree, &rows, &boundary, &vec![1.0; n])?;
    let mut rhs = vec![1.0; n];
    for x in 1..n {
        let qt: f64 = kernel.transition_row(x).iter().map(|&(y, p)| p * t[y]).sum();
        rhs[x] += 2.0 * qt;
    }
    let s = solve::solve(tree, &rows, &boundary, &rhs)?;
    Ok(tree
        .children(ROOT)
        .iter()
        .map(|&c| 1.0 + 2.0 * t[c] + s[c])
        .sum::<f64>()
        / d as f64)
}

/// Green function of the root-reflecting walk killed on return to the root:
/// column `y` holds `N(x, y)`, the expected visits to `y` from `x`.
#[derive(Debug, Clone)]
pub struct VisitMoments {
    columns: Vec<Vec<f64>>,
    root_children: Vec<usize>,
}

impl VisitMoments {
    /// Computes every column; O(n^2) time and memory.
    pub fn new(tree: &RootedTree, beta: f64) -> Result<Self> {
        let mut vm = VisitMoments::empty(tree, beta)?;
        for y in 0..tree.len() {
            vm.columns[y] = green_column(tree, beta, y)?;
        }
        Ok(vm)
    }

    fn empty(tree: &RootedTree, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if tree.num_children(ROOT) == 0 {
            return Err(Error::DegenerateTree("root has no children".into()));
        }
        Ok(VisitMoments {
            columns: vec![Vec::new(); tree.len()],
            root_children: tree.children(ROOT).to_vec(),
        })
    }

    fn green(&self, x: usize, y: usize) -> f64 {
        self.columns[y][x]
    }

    /// `E_rho[v_y]`.
    pub fn mean(&self, y: usize) -> f64 {
        if y == ROOT {
            return 1.0;
        }
        let d = self.root_children.len() as f64;
        self.root_children.iter().map(|&c| self.green(c, y)).sum::<f64>() / d
    }

    /// `E_rho[v_x v_y]`.
    pub fn pair(&self, x: usize, y: usize) -> f64 {
        if x == ROOT {
            return self.mean(y);
        }
        if y == ROOT {
            return self.mean(x);
        }
        let d = self.root_children.len() as f64;
        let nxy = self.green(x, y);
        let nyx = self.green(y, x);
        let mut s = 0.0;
        for &c in &self.root_children {
            let ncx = self.green(c, x);
            let ncy = self.green(c, y);
            s += ncx * nxy + ncy * nyx;
            if x == y {
                s -= ncx;
            }
        }
        s / d
    }

    /// `sum_{x, y} E_rho[v_x v_y]`.
    pub fn total(&self) -> f64 {
        let n = self.columns.len();
        let mut s = 0.0;
        for x in 0..n {
            for y in 0..n {
                s += self.pair(x, y);
            }
        }
        s
    }
}

/// `N(., y)`: solves `h = e_y + Q h` with `h = 0` at the root.
fn green_column(tree: &RootedTree, beta: f64, y: usize) -> Result<Vec<f64>> {
    let n = tree.len();
    if y == ROOT {
        return Ok(vec![0.0; n]);
    }
    let kernel = WalkKernel::root_reflecting(tree, beta)?;
    let mut boundary = vec![None; n];
    boundary[ROOT] = Some(0.0);
    let mut rhs = vec![0.0; n];
    rhs[y] = 1.0;
    solve::solve(tree, &kernel.rows(), &boundary, &rhs)
}

/// `E_rho[v_x v_y]` for the walk started at the root and stopped on its
/// first return, where `v_x` counts visits at times `1..=tau_rho^+`.
pub fn visit_covariance_exact(tree: &RootedTree, beta: f64, x: usize, y: usize) -> Result<f64> {
    let mut vm = VisitMoments::empty(tree, beta)?;
    // pair() only reads columns x and y.
    vm.columns[x] = green_column(tree, beta, x)?;
    if y != x {
        vm.columns[y] = green_column(tree, beta, y)?;
    }
    Ok(vm.pair(x, y))
}

/// Which of the three configurations of `(x, y)` relative to their closest
/// common ancestor `w` a pair falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisitCase {
    /// `w` is the root; one of the two is never visited.
    SplitAtRoot,
    /// `x = y`.
    Same,
    /// One vertex is an ancestor of the other.
    Nested,
    /// Neither is an ancestor of the other.
    Apart,
}

pub fn closest_common_ancestor(tree: &RootedTree, mut x: usize, mut y: usize) -> usize {
    while tree.depth(x) > tree.depth(y) {
        x = tree.parent(x).expect("non-root");
    }
    while tree.depth(y) > tree.depth(x) {
        y = tree.parent(y).expect("non-root");
    }
    while x != y {
        x = tree.parent(x).expect("non-root");
        y = tree.parent(y).expect("non-root");
    }
    x
}

pub fn visit_case(tree: &RootedTree, x: usize, y: usize) -> VisitCase {
    let w = closest_common_ancestor(tree, x, y);
    if w == ROOT && x != ROOT && y != ROOT && x != y {
        VisitCase::SplitAtRoot
    } else if x == y {
        VisitCase::Same
    } else if w == x || w == y {
        VisitCase::Nested
    } else {
        VisitCase::Apart
    }
}

/// Per-case constant `C` with
/// `E_rho[v_x v_y] <= C (c(x) beta + 1)(c(y) beta + 1) beta^{|x| + |y|}`,
/// for `x, y` off the root. Obtained by bounding every escape probability in
/// the exact case expressions by its worst value over depths.
pub fn visit_bound_constant(case: VisitCase, beta: f64) -> Result<f64> {
    check_beta_above_one(beta)?;
    let b1 = beta - 1.0;
    Ok(match case {
        VisitCase::SplitAtRoot => 0.0,
        VisitCase::Same => 2.0 / (b1 * b1),
        VisitCase::Nested => 2.0 * beta / b1.powi(3),
        VisitCase::Apart => 8.0 * beta.powi(4) / b1.powi(6),
    })
}

/// Right-hand side of the visit bound for a specific pair.
pub fn visit_bound(tree: &RootedTree, beta: f64, x: usize, y: usize) -> Result<f64> {
    let c = visit_bound_constant(visit_case(tree, x, y), beta)?;
    let fx = tree.num_children(x) as f64 * beta + 1.0;
    let fy = tree.num_children(y) as f64 * beta + 1.0;
    Ok(c * fx * fy * beta.powi((tree.depth(x) + tree.depth(y)) as i32))
}

/// `P_0(tau_k < tau_n) = (beta^n - 1)/(beta^{n-k} - 1)` for the walk on Z
/// stepping `+1` with probability `beta/(beta + 1)`.
pub fn gamblers_ruin(beta: f64, k: i64, n: i64) -> Result<f64> {
    check_beta_above_one(beta)?;
    if !(k < 0 && n > 0) {
        return Err(Error::Domain(format!("need k < 0 < n, got k={k}, n={n}")));
    }
    // Divided through by beta^n so large n cannot overflow.
    let inv_n = beta.powf(-(n as f64));
    Ok((1.0 - inv_n) / (beta.powf(-(k as f64)) - inv_n))
}

/// `E_0[L(k, tau_n)]`, the expected visits to `k` before first hitting `n`.
pub fn expected_local_time(beta: f64, k: i64, n: i64) -> Result<f64> {
    check_beta_above_one(beta)?;
    if n < 1 {
        return Err(Error::Domain(format!("need n >= 1, got {n}")));
    }
    if k >= n {
        return Err(Error::Domain(format!("need k < n, got k={k}, n={n}")));
    }
    let scale = (beta + 1.0) / (beta - 1.0);
    Ok(if k < 0 {
        (1.0 - beta.powf(-(n as f64))) * beta.powf(k as f64) * scale
    } else {
        (1.0 - beta.powf(-((n - k) as f64))) * scale
    })
}

/// Probability that the walk on the tree with a single branch point `w`
/// reaches the root before either leaf `x` or `y`, given depths.
pub fn branching_escape_probability(beta: f64, depth_w: u32, depth_x: u32, depth_y: u32) -> Result<f64> {
    check_beta_above_one(beta)?;
    if depth_w < 1 || depth_x <= depth_w || depth_y <= depth_w {
        return Err(Error::Domain(format!(
            "need |x|, |y| > |w| >= 1, got |w|={depth_w}, |x|={depth_x}, |y|={depth_y}"
        )));
    }
    let (w, x, y) = (depth_w as i32, depth_x as i32, depth_y as i32);
    let b = |e: i32| beta.powi(e);
    let num = (b(y - w) - 1.0) * (b(x - w) - 1.0);
    let den = 2.0 * b(y + x - w) - b(y + x - 2 * w) - b(x) - b(y) + 1.0;
    Ok(num / den)
}

/// The tree with root path of length `depth_w`, then two arms ending at
/// depths `depth_x` and `depth_y`. Returns the tree and the ids of `w, x, y`.
pub fn two_arm_tree(depth_w: u32, depth_x: u32, depth_y: u32) -> (RootedTree, usize, usize, usize) {
    let mut t = RootedTree::single();
    let mut v = ROOT;
    for _ in 0..depth_w {
        v = t.add_child(v);
    }
    let w = v;
    let mut x = w;
    for _ in depth_w..depth_x {
        x = t.add_child(x);
    }
    let mut y = w;
    for _ in depth_w..depth_y {
        y = t.add_child(y);
    }
    (t, w, x, y)
}

/// One step of the biased walk on Z.
#[inline]
pub fn z_step<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> i64 {
    if rng.random::<f64>() * (beta + 1.0) < beta {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::derive_stream;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn transition_row_examples() {
        let star = RootedTree::star(2);
        let k = WalkKernel::root_reflecting(&star, 2.0).unwrap();
        assert_eq!(k.transition_row(ROOT), vec![(1, 0.5), (2, 0.5)]);

        let path = RootedTree::path(2);
        let k = WalkKernel::root_reflecting(&path, 2.0).unwrap();
        let row = k.transition_row(1);
        assert!(close(row[0].1, 1.0 / 3.0, 1e-15) && row[0].0 == 0);
        assert!(close(row[1].1, 2.0 / 3.0, 1e-15) && row[1].0 == 2);

        let b = BranchTree::from_inner(&RootedTree::path(1));
        let k = WalkKernel::ancestor_absorbing(&b, 2.0).unwrap();
        let row = k.transition_row(BranchTree::RHO);
        assert!(close(row[0].1, 0.6, 1e-15) && row[0].0 == BranchTree::RHO_BAR);
        assert!(close(row[1].1, 0.4, 1e-15));
        assert_eq!(k.transition_row(BranchTree::RHO_BAR), vec![(0, 1.0)]);
    }

    #[test]
    fn rows_sum_to_one() {
        let t = RootedTree::from_parents(&[0, 0, 0, 1, 1, 4, 4, 4]).unwrap();
        for beta in [0.5, 1.0, 1.1, 2.0] {
            let k = WalkKernel::root_reflecting(&t, beta).unwrap();
            for x in 0..t.len() {
                let s: f64 = k.transition_row(x).iter().map(|p| p.1).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
            let b = BranchTree::from_inner(&t);
            let k = WalkKernel::ancestor_absorbing(&b, beta).unwrap();
            for x in 0..b.tree().len() {
                let s: f64 = k.transition_row(x).iter().map(|p| p.1).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hitting_time_examples() {
        let b = BranchTree::from_inner(&RootedTree::path(1));
        let k = WalkKernel::ancestor_absorbing(&b, 1.1).unwrap();
        let h = expected_hitting_time(&k, BranchTree::RHO, BranchTree::RHO_BAR).unwrap();
        assert!(close(h, (3.0 * 1.1 + 1.0) / 2.1, 1e-12));
        assert_eq!(expected_hitting_time(&k, 2, 2).unwrap(), 0.0);

        let path = RootedTree::path(2);
        assert!(close(expected_return_time(&path, 2.0).unwrap(), 6.0, 1e-12));
        assert!(close(expected_return_time_formula(&path, 2.0).unwrap(), 6.0, 1e-15));
        assert!(close(expected_return_time_formula(&RootedTree::star(2), 1.7).unwrap(), 2.0, 1e-15));
        assert!(matches!(
            expected_return_time_formula(&RootedTree::single(), 2.0),
            Err(Error::DegenerateTree(_))
        ));
    }

    #[test]
    fn absorbing_ancestor_blocks_deeper_targets() {
        let b = BranchTree::from_inner(&RootedTree::path(2));
        let k = WalkKernel::ancestor_absorbing(&b, 1.5).unwrap();
        assert!(matches!(expected_hitting_time(&k, BranchTree::RHO, 3), Err(Error::Singular(_))));
        // From below rho the ancestor can only be hit after rho.
        assert!(expected_hitting_time(&k, 3, BranchTree::RHO).is_ok());
    }

    #[test]
    fn excursion_examples() {
        let bare = BranchTree::from_inner(&RootedTree::single());
        let mut rng = derive_stream(1, 0);
        for _ in 0..50 {
            assert_eq!(simulate_excursion(&bare, 1.3, &mut rng).unwrap(), 1);
        }
        let b = BranchTree::from_inner(&RootedTree::from_parents(&[0, 0, 1]).unwrap());
        for _ in 0..200 {
            // Every return to rho takes an even number of steps.
            assert_eq!(simulate_excursion(&b, 1.3, &mut rng).unwrap() % 2, 1);
        }
    }

    #[test]
    fn ruin_and_local_time_examples() {
        assert!(close(gamblers_ruin(2.0, -1, 1).unwrap(), 1.0 / 3.0, 1e-15));
        assert!(close(gamblers_ruin(2.0, -2, 2).unwrap(), 0.2, 1e-15));
        let mut prev = 1.0;
        for k in 1..40 {
            let p = gamblers_ruin(1.3, -k, 3).unwrap();
            assert!(p < prev);
            prev = p;
        }
        assert!(close(expected_local_time(2.0, 0, 1).unwrap(), 1.5, 1e-15));
        assert!(close(expected_local_time(2.0, -1, 1).unwrap(), 0.75, 1e-15));
        assert!(close(expected_local_time(2.0, 1, 2).unwrap(), 1.5, 1e-15));
        assert!(expected_local_time(2.0, 2, 2).is_err());
        assert!(gamblers_ruin(1.0, -1, 1).is_err());
    }

    #[test]
    fn escape_probability_examples() {
        assert!(close(branching_escape_probability(2.0, 1, 2, 2).unwrap(), 0.2, 1e-15));
        let deep = branching_escape_probability(2.0, 1, 30, 30).unwrap();
        assert!((deep - 1.0 / 3.0).abs() < 1e-8);
        let deep = branching_escape_probability(1.1, 2, 400, 400).unwrap();
        assert!((deep - 1.0 / (2.0 * 1.21 - 1.0)).abs() < 1e-8);
        assert!(branching_escape_probability(2.0, 0, 2, 2).is_err());
        assert!(branching_escape_probability(2.0, 2, 2, 3).is_err());
    }

    #[test]
    fn escape_probability_matches_solve() {
        for (beta, w, x, y) in [(2.0, 1, 2, 3), (1.5, 2, 4, 3), (1.1, 3, 5, 8)] {
            let (t, wv, xv, yv) = two_arm_tree(w, x, y);
            let k = WalkKernel::root_reflecting(&t, beta).unwrap();
            // From w, escape towards the root before touching either leaf.
            let solved = hitting_probability(&k, wv, &[ROOT], &[xv, yv]).unwrap();
            let formula = branching_escape_probability(beta, w, x, y).unwrap();
            assert!(close(solved, formula, 1e-10), "{solved} vs {formula}");
        }
    }

    #[test]
    fn visit_examples() {
        let t = RootedTree::path(1);
        assert!(close(visit_covariance_exact(&t, 2.0, 1, 1).unwrap(), 1.0, 1e-14));
        let t = RootedTree::path(2);
        let vm = VisitMoments::new(&t, 2.0).unwrap();
        assert!(close(vm.pair(1, 2), visit_covariance_exact(&t, 2.0, 1, 2).unwrap(), 1e-14));
        assert!(close(vm.total(), return_time_second_moment(&t, 2.0).unwrap(), 1e-10));
    }

    #[test]
    fn bound_cases() {
        let t = RootedTree::from_parents(&[0, 1, 1, 2, 0]).unwrap();
        assert_eq!(visit_case(&t, 3, 3), VisitCase::Same);
        assert_eq!(visit_case(&t, 1, 4), VisitCase::Nested);
        assert_eq!(visit_case(&t, 3, 4), VisitCase::Apart);
        assert_eq!(visit_case(&t, 3, 5), VisitCase::SplitAtRoot);
        assert!(visit_bound_constant(VisitCase::Same, 1.0).is_err());
    }

    #[test]
    fn path_visits_match_lattice_local_times() {
        // Path rooted at -depth; vertex i is the lattice site i - depth.
        let (beta, depth, n) = (1.5f64, 100i64, 6i64);
        let path = RootedTree::path((depth + n) as usize);
        let k = WalkKernel::root_reflecting(&path, beta).unwrap();
        for site in [-3i64, 0, 4] {
            let v = expected_visits(&k, depth as usize, (site + depth) as usize, &[(depth + n) as usize]).unwrap();
            let exact = expected_local_time(beta, site, n).unwrap();
            assert!((v - exact).abs() < 1e-10 * exact, "{site}: {v} vs {exact}");
        }
    }
}
