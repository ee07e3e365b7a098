//! Arena-based rooted trees and their samplers.
//!
//! Vertex 0 is always the root. Vertices are appended, never removed, so ids
//! are stable and a vertex's parent always has a smaller id.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::offspring::{OffspringLaw, OffspringSampler};
use crate::stream::{self, Domain};

pub const ROOT: usize = 0;
pub const DEFAULT_SIZE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl Default for RootedTree {
    fn default() -> Self {
        Self::single()
    }
}

impl RootedTree {
    /// The one-vertex tree.
    pub fn single() -> Self {
        RootedTree { parent: vec![usize::MAX], children: vec![Vec::new()], depth: vec![0] }
    }

    /// Path `0 - 1 - ... - n`.
    pub fn path(n: usize) -> Self {
        let mut t = Self::single();
        for v in 0..n {
            t.add_child(v);
        }
        t
    }

    /// Root with `k` leaf children.
    pub fn star(k: usize) -> Self {
        let mut t = Self::single();
        for _ in 0..k {
            t.add_child(ROOT);
        }
        t
    }

    /// Builds a tree from `parents[v - 1] = parent of v` for `v = 1..n`.
    /// Parents must precede their children.
    pub fn from_parents(parents: &[usize]) -> Result<Self> {
        let mut t = Self::single();
        for (i, &p) in parents.iter().enumerate() {
            let v = i + 1;
            if p >= v {
                return Err(Error::DegenerateTree(format!("parent {p} of vertex {v} does not precede it")));
            }
            t.add_child(p);
        }
        Ok(t)
    }

    /// Appends a new child of `p` and returns its id.
    pub fn add_child(&mut self, p: usize) -> usize {
        let v = self.parent.len();
        self.parent.push(p);
        self.children.push(Vec::new());
        self.depth.push(self.depth[p] + 1);
        self.children[p].push(v);
        v
    }

    /// Copies `sub` below `at`, its root becoming a new child of `at`.
    /// Returns the id of the copied root.
    pub fn graft(&mut self, at: usize, sub: &RootedTree) -> usize {
        let offset = self.len();
        let top = self.add_child(at);
        debug_assert_eq!(top, offset);
        for v in 1..sub.len() {
            self.add_child(sub.parent[v] + offset);
        }
        top
    }

    /// Subtree rooted at `v`, renumbered from 0.
    pub fn subtree(&self, v: usize) -> RootedTree {
        let mut out = RootedTree::single();
        let mut queue = VecDeque::from([(v, ROOT)]);
        while let Some((u, image)) = queue.pop_front() {
            for &c in &self.children[u] {
                let ci = out.add_child(image);
                queue.push_back((c, ci));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        if v == ROOT {
            None
        } else {
            Some(self.parent[v])
        }
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn num_children(&self, v: usize) -> usize {
        self.children[v].len()
    }

    /// Distance from the root, `|v|`.
    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Neighbours of `v`: its parent (if any) followed by its children.
    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent(v).into_iter().chain(self.children[v].iter().copied())
    }

    /// `Z_n` for `n = 0..=height`.
    pub fn generation_sizes(&self) -> Vec<usize> {
        let mut z = vec![0; self.height() + 1];
        for &d in &self.depth {
            z[d] += 1;
        }
        z
    }

    /// One `parent child` line per edge, in id order.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for v in 1..self.len() {
            let _ = writeln!(out, "{} {}", self.parent[v], v);
        }
        out
    }

    /// Inverse of [`RootedTree::to_edge_list`]. Child ids must be `1, 2, ...`
    /// in order of appearance.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut t = Self::single();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<usize> {
                s.and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::DegenerateTree(format!("line {}: expected two vertex ids", line_no + 1)))
            };
            let p = parse(it.next())?;
            let c = parse(it.next())?;
            if c != t.len() || p >= c {
                return Err(Error::DegenerateTree(format!(
                    "line {}: edge {p} {c} out of order",
                    line_no + 1
                )));
            }
            t.add_child(p);
        }
        Ok(t)
    }
}

/// Samples offspring for every vertex in `frontier` and their descendants,
/// breadth first.
fn grow<R: Rng + ?Sized>(
    tree: &mut RootedTree,
    frontier: impl IntoIterator<Item = usize>,
    sampler: &OffspringSampler,
    rng: &mut R,
    size_cap: usize,
) -> Result<()> {
    let mut queue: VecDeque<usize> = frontier.into_iter().collect();
    while let Some(v) = queue.pop_front() {
        let k = sampler.sample(rng);
        if tree.len() + k > size_cap {
            return Err(Error::CapExceeded { cap: size_cap, reached: tree.len() + k });
        }
        for _ in 0..k {
            let c = tree.add_child(v);
            queue.push_back(c);
        }
    }
    Ok(())
}

/// Galton-Watson tree with offspring law `law`.
pub fn sample_gw_tree<R: Rng + ?Sized>(law: &OffspringLaw, rng: &mut R, size_cap: usize) -> Result<RootedTree> {
    law.require_subcritical()?;
    if size_cap == 0 {
        return Err(Error::Domain("size cap must be at least 1".into()));
    }
    let mut tree = RootedTree::single();
    grow(&mut tree, [ROOT], &law.sampler(), rng, size_cap)?;
    Ok(tree)
}

/// A trap tree: `rho` with an extra ancestor `rho_bar` above it.
///
/// Stored as one arena whose root (id 0) is `rho_bar` and whose only root
/// child (id 1) is `rho`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchTree {
    tree: RootedTree,
}

impl BranchTree {
    pub const RHO_BAR: usize = 0;
    pub const RHO: usize = 1;

    /// Wraps `inner` (rooted at `rho`) with a new ancestor.
    pub fn from_inner(inner: &RootedTree) -> Self {
        let mut tree = RootedTree::single();
        tree.graft(ROOT, inner);
        BranchTree { tree }
    }

    /// Tree including `rho_bar`.
    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    /// The tree without its ancestor, rooted at `rho`.
    pub fn inner(&self) -> RootedTree {
        self.tree.subtree(Self::RHO)
    }

    pub fn rho_children(&self) -> usize {
        self.tree.num_children(Self::RHO)
    }

    /// Number of vertices excluding `rho_bar`.
    pub fn size(&self) -> usize {
        self.tree.len() - 1
    }
}

/// `rho` gets `xi* - 1` children, each the root of an independent GW tree.
pub fn sample_branch_tree<R: Rng + ?Sized>(law: &OffspringLaw, rng: &mut R) -> Result<BranchTree> {
    sample_branch_tree_capped(law, rng, DEFAULT_SIZE_CAP)
}

pub fn sample_branch_tree_capped<R: Rng + ?Sized>(
    law: &OffspringLaw,
    rng: &mut R,
    size_cap: usize,
) -> Result<BranchTree> {
    law.require_subcritical()?;
    let star = law.size_biased()?.sampler().sample(rng);
    let mut tree = RootedTree::single();
    let rho = tree.add_child(ROOT);
    let buds: Vec<usize> = (1..star).map(|_| tree.add_child(rho)).collect();
    grow(&mut tree, buds, &law.sampler(), rng, size_cap)?;
    Ok(BranchTree { tree })
}

/// A finite piece of the subcritical GW tree conditioned to survive.
///
/// The backbone `rho_0, rho_1, ...` is a single infinite path; backbone
/// vertex `k` has `xi*_k` children, one of them `rho_{k+1}`, the others
/// roots of independent GW branches. Decorations of `rho_k` come from the
/// reserved stream `(key, Tree, k)`, so extending the window never changes
/// what was already sampled.
#[derive(Debug, Clone)]
pub struct KestenWindow {
    law: OffspringLaw,
    key: u64,
    size_cap: usize,
    tree: RootedTree,
    backbone: Vec<usize>,
    /// Backbone index of the branch each vertex belongs to.
    anchor: Vec<usize>,
    /// Roots of the branches hanging off each decorated backbone vertex.
    branches: Vec<Vec<usize>>,
}

impl KestenWindow {
    /// Window with backbone `rho_0..rho_len` and decorations on `rho_0..rho_{len-1}`.
    pub fn new(law: &OffspringLaw, len: usize, key: u64) -> Result<Self> {
        law.require_subcritical()?;
        if len == 0 {
            return Err(Error::Domain("window length must be at least 1".into()));
        }
        let mut w = KestenWindow {
            law: law.clone(),
            key,
            size_cap: DEFAULT_SIZE_CAP,
            tree: RootedTree::single(),
            backbone: vec![ROOT],
            anchor: vec![0],
            branches: Vec::new(),
        };
        w.decorate_until(len)?;
        Ok(w)
    }

    /// Decorates backbone vertices until `len` of them carry decorations.
    fn decorate_until(&mut self, len: usize) -> Result<()> {
        let star = self.law.size_biased()?.sampler();
        let offspring = self.law.sampler();
        while self.branches.len() < len {
            let k = self.branches.len();
            let mut rng = stream::stream(self.key, Domain::Tree, k as u64);
            let spine = self.backbone[k];
            let xi_star = star.sample(&mut rng);
            if xi_star == 0 {
                return Err(Error::Extension("size-biased law produced no backbone child".into()));
            }
            // The backbone child takes a uniform slot among the xi* children;
            // placing it first only relabels, the law is unchanged.
            let next = self.tree.add_child(spine);
            self.anchor.push(k + 1);
            self.backbone.push(next);
            let first = self.tree.len();
            let roots: Vec<usize> = (1..xi_star).map(|_| self.tree.add_child(spine)).collect();
            grow(&mut self.tree, roots.iter().copied(), &offspring, &mut rng, self.size_cap)
                .map_err(|e| Error::Extension(e.to_string()))?;
            self.anchor.resize(self.tree.len(), k);
            debug_assert!(self.anchor[first..].iter().all(|&a| a == k));
            self.branches.push(roots);
        }
        Ok(())
    }

    /// Doubles the decorated length.
    pub fn extend(&mut self) -> Result<()> {
        let target = (2 * self.branches.len()).max(1);
        self.decorate_until(target)
    }

    /// Makes sure backbone vertex `k` is decorated.
    pub fn ensure_decorated(&mut self, k: usize) -> Result<()> {
        while self.branches.len() <= k {
            self.extend()?;
        }
        Ok(())
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    /// Number of decorated backbone vertices.
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Vertex id of `rho_k`.
    pub fn backbone(&self, k: usize) -> usize {
        self.backbone[k]
    }

    pub fn backbone_ids(&self) -> &[usize] {
        &self.backbone
    }

    /// Backbone index of the branch containing `v`; the projection `X~`.
    pub fn anchor(&self, v: usize) -> usize {
        self.anchor[v]
    }

    pub fn is_decorated(&self, v: usize) -> bool {
        self.anchor[v] < self.branches.len()
    }

    /// Roots of the branches at `rho_k`.
    pub fn branch_roots(&self, k: usize) -> &[usize] {
        &self.branches[k]
    }

    /// The trap at `rho_k`: `rho_k` with its branches, plus an ancestor that
    /// stands for both backbone neighbours.
    pub fn branch_tree(&self, k: usize) -> BranchTree {
        let mut inner = RootedTree::single();
        for &r in &self.branches[k] {
            let sub = self.tree.subtree(r);
            inner.graft(ROOT, &sub);
        }
        BranchTree::from_inner(&inner)
    }

    /// Total number of branch vertices at `rho_k`.
    pub fn branch_size(&self, k: usize) -> usize {
        self.branches[k].iter().map(|&r| subtree_size(&self.tree, r)).sum()
    }

    /// Height of the tallest branch at `rho_k`, counting the bud itself as 1;
    /// 0 if there are no branches.
    pub fn branch_height(&self, k: usize) -> usize {
        let base = self.tree.depth(self.backbone[k]);
        let mut best = 0;
        let mut stack: Vec<usize> = self.branches[k].clone();
        while let Some(v) = stack.pop() {
            best = best.max(self.tree.depth(v) - base);
            stack.extend_from_slice(self.tree.children(v));
        }
        best
    }
}

fn subtree_size(tree: &RootedTree, v: usize) -> usize {
    let mut n = 0;
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        n += 1;
        stack.extend_from_slice(tree.children(u));
    }
    n
}

/// Window keyed by a draw from `rng`.
pub fn sample_kesten_window<R: Rng + ?Sized>(law: &OffspringLaw, len: usize, rng: &mut R) -> Result<KestenWindow> {
    KestenWindow::new(law, len, rng.random())
}

pub fn generation_sizes(tree: &RootedTree) -> Vec<usize> {
    tree.generation_sizes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws;
    use crate::stream::derive_stream;

    #[test]
    fn generation_size_examples() {
        assert_eq!(RootedTree::path(2).generation_sizes(), vec![1, 1, 1]);
        assert_eq!(RootedTree::star(2).generation_sizes(), vec![1, 2]);
    }

    #[test]
    fn identity_law_is_rejected() {
        let line = OffspringLaw::new(vec![0.0, 1.0]).unwrap();
        let mut rng = derive_stream(1, 0);
        assert!(matches!(
            sample_gw_tree(&line, &mut rng, 100),
            Err(Error::NotSubcritical { .. })
        ));
    }

    #[test]
    fn law_a_trees_are_binary() {
        let law = laws::law_a();
        let mut rng = derive_stream(3, 0);
        for _ in 0..200 {
            let t = sample_gw_tree(&law, &mut rng, DEFAULT_SIZE_CAP).unwrap();
            for v in 0..t.len() {
                assert!(matches!(t.num_children(v), 0 | 2));
            }
            assert_eq!(t.generation_sizes().iter().sum::<usize>(), t.len());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let heavy = OffspringLaw::from_pairs(&[(0, 0.55), (2, 0.45)]).unwrap();
        let mut rng = derive_stream(5, 0);
        let mut saw_cap = false;
        for _ in 0..2000 {
            if let Err(Error::CapExceeded { cap, reached }) = sample_gw_tree(&heavy, &mut rng, 3) {
                assert_eq!(cap, 3);
                assert!(reached > 3);
                saw_cap = true;
            }
        }
        assert!(saw_cap);
    }

    #[test]
    fn branch_tree_shapes() {
        let mut rng = derive_stream(8, 0);
        for _ in 0..100 {
            let b = sample_branch_tree(&laws::law_a(), &mut rng).unwrap();
            assert_eq!(b.rho_children(), 1);
            assert_eq!(b.tree().num_children(BranchTree::RHO_BAR), 1);
        }
        let tiny = OffspringLaw::from_pairs(&[(0, 1e-9), (1, 1.0 - 1e-9)]).unwrap();
        let b = sample_branch_tree(&tiny, &mut rng).unwrap();
        assert_eq!(b.tree().len(), 2);
    }

    #[test]
    fn kesten_window_law_a_has_one_branch_per_vertex() {
        let mut rng = derive_stream(2, 0);
        let w = sample_kesten_window(&laws::law_a(), 5, &mut rng).unwrap();
        assert_eq!(w.len(), 5);
        for k in 0..5 {
            assert_eq!(w.branch_roots(k).len(), 1);
            assert_eq!(w.tree().depth(w.backbone(k)), k);
            assert_eq!(w.anchor(w.backbone(k)), k);
        }
    }

    #[test]
    fn kesten_window_extension_preserves_prefix() {
        let law = laws::law_b();
        let mut short = KestenWindow::new(&law, 7, 99).unwrap();
        let long = KestenWindow::new(&law, 40, 99).unwrap();
        short.ensure_decorated(39).unwrap();
        for k in 0..40 {
            assert_eq!(short.branch_tree(k), long.branch_tree(k), "k={k}");
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let mut rng = derive_stream(4, 0);
        let t = loop {
            let t = sample_gw_tree(&laws::law_b(), &mut rng, 1000).unwrap();
            if t.len() > 5 {
                break t;
            }
        };
        assert_eq!(RootedTree::from_edge_list(&t.to_edge_list()).unwrap(), t);
        assert!(RootedTree::from_edge_list("0 2\n").is_err());
    }

    #[test]
    fn subtree_and_graft_are_inverse() {
        let t = RootedTree::from_parents(&[0, 0, 1, 1, 2]).unwrap();
        let mut host = RootedTree::single();
        let top = host.graft(ROOT, &t);
        assert_eq!(host.subtree(top), t);
        assert!(RootedTree::from_parents(&[1]).is_err());
    }
}
