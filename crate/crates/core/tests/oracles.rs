//! Tree and lattice solves against dense LU on the same transition matrix.
#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use trapwalk::tree_walk::{
    expected_hitting_time, expected_local_time, expected_return_time, expected_return_time_formula,
    gamblers_ruin, hitting_probability, return_time_second_moment, visit_bound, visit_case, VisitCase,
    VisitMoments, WalkKernel,
};
use trapwalk::trees::{BranchTree, RootedTree, ROOT};

/// Dense `(I - Q)^{-1}` over the states not in `stop`, as (index map, inverse).
fn dense_fundamental(rows: &[Vec<(usize, f64)>], stop: &[usize]) -> (Vec<Option<usize>>, DMatrix<f64>) {
    let n = rows.len();
    let mut idx = vec![None; n];
    let mut m = 0;
    for x in 0..n {
        if !stop.contains(&x) {
            idx[x] = Some(m);
            m += 1;
        }
    }
    let mut a = DMatrix::<f64>::identity(m, m);
    for x in 0..n {
        let Some(i) = idx[x] else { continue };
        for &(y, p) in &rows[x] {
            if let Some(j) = idx[y] {
                a[(i, j)] -= p;
            }
        }
    }
    (idx, a.lu().try_inverse().expect("transient block is invertible"))
}

fn kernel_rows(k: &WalkKernel<'_>) -> Vec<Vec<(usize, f64)>> {
    (0..k.tree().len()).map(|x| k.transition_row(x)).collect()
}

fn arb_tree(max: usize) -> impl Strategy<Value = RootedTree> {
    prop::collection::vec(any::<prop::sample::Index>(), 1..max).prop_map(|picks| {
        let parents: Vec<usize> = picks.iter().enumerate().map(|(i, p)| p.index(i + 1)).collect();
        RootedTree::from_parents(&parents).unwrap()
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn return_time_solve_formula_and_dense_agree(tree in arb_tree(40), beta in 0.3f64..3.0) {
        let k = WalkKernel::root_reflecting(&tree, beta).unwrap();
        let (idx, inv) = dense_fundamental(&kernel_rows(&k), &[ROOT]);
        let h = &inv * DVector::from_element(inv.nrows(), 1.0);
        let d = tree.num_children(ROOT) as f64;
        let dense = 1.0 + tree.children(ROOT).iter().map(|&c| h[idx[c].unwrap()]).sum::<f64>() / d;
        let solved = expected_return_time(&tree, beta).unwrap();
        prop_assert!(rel(solved, dense) < 1e-9, "{solved} vs {dense}");
        prop_assert!(rel(expected_return_time_formula(&tree, beta).unwrap(), solved) < 1e-9);
    }

    #[test]
    fn second_moment_matches_dense_and_visit_sum(tree in arb_tree(25), beta in 0.5f64..2.5) {
        let k = WalkKernel::root_reflecting(&tree, beta).unwrap();
        let rows = kernel_rows(&k);
        let (idx, inv) = dense_fundamental(&rows, &[ROOT]);
        let m = inv.nrows();
        let t = &inv * DVector::from_element(m, 1.0);
        let mut rhs = DVector::from_element(m, 1.0);
        for x in 1..tree.len() {
            let i = idx[x].unwrap();
            rhs[i] += 2.0 * rows[x].iter().filter_map(|&(y, p)| idx[y].map(|j| p * t[j])).sum::<f64>();
        }
        let s = &inv * rhs;
        let d = tree.num_children(ROOT) as f64;
        let dense: f64 = tree.children(ROOT).iter().map(|&c| {
            let i = idx[c].unwrap();
            1.0 + 2.0 * t[i] + s[i]
        }).sum::<f64>() / d;
        let solved = return_time_second_moment(&tree, beta).unwrap();
        prop_assert!(rel(solved, dense) < 1e-8, "{solved} vs {dense}");
        let visits = VisitMoments::new(&tree, beta).unwrap().total();
        prop_assert!(rel(visits, solved) < 1e-8, "{visits} vs {solved}");
    }

    #[test]
    fn excursion_mean_matches_dense(tree in arb_tree(30), beta in 0.3f64..3.0) {
        let branch = BranchTree::from_inner(&tree);
        let k = WalkKernel::ancestor_absorbing(&branch, beta).unwrap();
        let (idx, inv) = dense_fundamental(&kernel_rows(&k), &[BranchTree::RHO_BAR]);
        let h = &inv * DVector::from_element(inv.nrows(), 1.0);
        let dense = h[idx[BranchTree::RHO].unwrap()];
        let solved = expected_hitting_time(&k, BranchTree::RHO, BranchTree::RHO_BAR).unwrap();
        prop_assert!(rel(solved, dense) < 1e-9, "{solved} vs {dense}");
    }

    #[test]
    fn hitting_probability_matches_dense(tree in arb_tree(30), beta in 0.3f64..3.0, pick in any::<prop::sample::Index>()) {
        let target = 1 + pick.index(tree.len() - 1);
        let k = WalkKernel::root_reflecting(&tree, beta).unwrap();
        let rows = kernel_rows(&k);
        let (idx, inv) = dense_fundamental(&rows, &[ROOT, target]);
        // One-step chance of landing on the target, then propagate.
        let b = DVector::from_iterator(inv.nrows(), (0..tree.len()).filter(|x| idx[*x].is_some()).map(|x| {
            rows[x].iter().filter(|&&(y, _)| y == target).map(|&(_, p)| p).sum::<f64>()
        }));
        let h = &inv * b;
        for x in 0..tree.len() {
            let Some(i) = idx[x] else { continue };
            let solved = hitting_probability(&k, x, &[target], &[ROOT]).unwrap();
            prop_assert!((solved - h[i]).abs() < 1e-10, "x={x}: {solved} vs {}", h[i]);
        }
    }

    #[test]
    fn visit_moments_respect_case_bounds(tree in arb_tree(20), beta in 1.05f64..3.0) {
        let vm = VisitMoments::new(&tree, beta).unwrap();
        for x in 1..tree.len() {
            for y in 1..tree.len() {
                let exact = vm.pair(x, y);
                let bound = visit_bound(&tree, beta, x, y).unwrap();
                prop_assert!(exact <= bound * (1.0 + 1e-9) + 1e-12, "{x},{y}: {exact} > {bound}");
                if visit_case(&tree, x, y) == VisitCase::SplitAtRoot {
                    prop_assert!(exact.abs() < 1e-12);
                }
            }
        }
    }
}

/// Segment `[lo, n]` of the biased walk on Z with both ends absorbing.
fn segment_rows(beta: f64, lo: i64, n: i64) -> Vec<Vec<(usize, f64)>> {
    let p = beta / (beta + 1.0);
    (lo..=n)
        .map(|z| {
            let i = (z - lo) as usize;
            if z == lo || z == n {
                vec![(i, 1.0)]
            } else {
                vec![(i + 1, p), (i - 1, 1.0 - p)]
            }
        })
        .collect()
}

#[test]
fn gamblers_ruin_matches_absorption_solve() {
    for beta in [1.1, 1.5, 2.0] {
        for (k, n) in [(-1, 1), (-3, 5), (-10, 2), (-4, 20)] {
            let rows = segment_rows(beta, k, n);
            let last = rows.len() - 1;
            let (idx, inv) = dense_fundamental(&rows, &[0, last]);
            let mut b = DVector::zeros(inv.nrows());
            b[idx[1].unwrap()] = 1.0 / (beta + 1.0);
            let h = &inv * b;
            let dense = h[idx[(-k) as usize].unwrap()];
            let closed = gamblers_ruin(beta, k, n).unwrap();
            assert!(rel(closed, dense) < 1e-10, "beta={beta} k={k} n={n}: {closed} vs {dense}");
        }
    }
}

#[test]
fn local_times_match_green_function() {
    for beta in [1.1f64, 1.5, 2.0] {
        // Deep enough that beta^{-depth} is below double precision.
        let depth = (40.0 / beta.ln()).ceil() as i64;
        for n in [1, 3, 12] {
            let rows = segment_rows(beta, -depth, n);
            let last = rows.len() - 1;
            let (idx, inv) = dense_fundamental(&rows, &[0, last]);
            let start = idx[depth as usize].unwrap();
            for k in [-5, -2, -1, 0, n / 2, n - 1] {
                let dense = inv[(start, idx[(k + depth) as usize].unwrap())];
                let closed = expected_local_time(beta, k, n).unwrap();
                assert!(rel(closed, dense) < 1e-10, "beta={beta} n={n} k={k}: {closed} vs {dense}");
            }
        }
    }
}

#[test]
fn path_tree_has_linear_return_time() {
    // Path of length L at bias beta: 2 sum_{n=1}^{L} beta^{n-1}.
    for beta in [0.5f64, 1.0, 2.0] {
        let t = RootedTree::path(6);
        let expected: f64 = 2.0 * (0..6).map(|n| beta.powi(n)).sum::<f64>();
        assert!(rel(expected_return_time(&t, beta).unwrap(), expected) < 1e-12);
    }
}
