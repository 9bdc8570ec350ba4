//! Independent oracles shared by the integration suites. Nothing here calls
//! the library's canonical forms or enumerators.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use robust_amp::forest::Tree;

/// Every bracket expression of each degree `0..=d`, duplicates included.
pub fn expressions(d: usize) -> Vec<Vec<Tree>> {
    let mut out: Vec<Vec<Tree>> = vec![vec![Tree::Empty]];
    for m in 1..=d {
        let mut level: Vec<Tree> = out[m - 1].iter().map(|t| Tree::Reroot(Box::new(t.clone()))).collect();
        for i in 1..m {
            for a in &out[i] {
                for b in &out[m - i] {
                    level.push(Tree::Graft(Box::new(a.clone()), Box::new(b.clone())));
                }
            }
        }
        out.push(level);
    }
    out
}

/// Parent array of the tree an expression denotes; vertex 0 is the root.
pub fn parent_array(t: &Tree) -> Vec<Option<usize>> {
    fn build(t: &Tree, parents: &mut Vec<Option<usize>>, root: usize) {
        match t {
            Tree::Empty => {}
            Tree::Reroot(c) => {
                let child = parents.len();
                parents.push(Some(root));
                build(c, parents, child);
            }
            Tree::Graft(a, b) => {
                build(a, parents, root);
                build(b, parents, root);
            }
        }
    }
    let mut parents = vec![None];
    build(t, &mut parents, 0);
    parents
}

/// Sorted-children string of the subtree at `v`.
pub fn ahu(parents: &[Option<usize>], v: usize) -> String {
    let mut kids: Vec<String> =
        (0..parents.len()).filter(|&u| parents[u] == Some(v)).map(|u| ahu(parents, u)).collect();
    kids.sort();
    format!("[{}]", kids.concat())
}

pub fn oracle_key(t: &Tree) -> String {
    ahu(&parent_array(t), 0)
}

/// Root-preserving isomorphism by trying every vertex bijection.
pub fn isomorphic_brute_force(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        if perm[0] == 0 && (1..n).all(|v| a[v].map(|p| perm[p]) == b[perm[v]]) {
            return true;
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Distinct lumber of degree ≤ d by generating every (base, trunk
/// sequence) and filtering duplicates.
pub fn brute_force_lumber_count(d: usize) -> usize {
    let exprs = expressions(d);
    let mut seen = BTreeSet::new();
    for (bd, bases) in exprs.iter().enumerate() {
        for base in bases.iter().filter(|t| t.is_well_formed()) {
            let key = oracle_key(base);
            let mut trunks = Vec::new();
            trunk_sequences(&exprs, d - bd, &mut trunks, &mut |seq| {
                let mut seq = seq.to_vec();
                seq.sort();
                seen.insert((key.clone(), seq));
            });
        }
    }
    seen.len()
}

fn trunk_sequences(exprs: &[Vec<Tree>], budget: usize, stack: &mut Vec<String>, visit: &mut dyn FnMut(&[String])) {
    visit(stack);
    for (m, level) in exprs.iter().enumerate().skip(1).take(budget) {
        for t in level.iter().filter(|t| t.is_well_formed()) {
            stack.push(oracle_key(t));
            trunk_sequences(exprs, budget - m, stack, visit);
            stack.pop();
        }
    }
}

/// Uniformly random bracket expression of exactly `d` edges.
pub fn random_tree(rng: &mut impl Rng, d: usize) -> Tree {
    if d == 0 {
        return Tree::Empty;
    }
    if d == 1 || rng.random_bool(0.5) {
        return Tree::reroot(random_tree(rng, d - 1));
    }
    let k = rng.random_range(1..d);
    Tree::graft(random_tree(rng, k), random_tree(rng, d - k))
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `u^⊤Au ≥ (1−η)tr(A)` instance: `A = (1−η')uu^⊤ + η'·B` for a random PSD
/// `B` of unit trace, with `η' ≤ η` chosen so the bound holds.
pub fn rounding_instance(rng: &mut impl Rng, n: usize, eta: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    u.iter_mut().for_each(|v| *v /= norm);
    let k = rng.random_range(1..=n);
    let g: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect()).collect();
    let mut b = vec![vec![0.0; n]; n];
    for row in &g {
        for i in 0..n {
            for j in 0..n {
                b[i][j] += row[i] * row[j];
            }
        }
    }
    let tr: f64 = (0..n).map(|i| b[i][i]).sum();
    let s = rng.random_range(0.0..=1.0) * eta;
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = (1.0 - s) * u[i] * u[j] + s * b[i][j] / tr;
        }
    }
    (a, u)
}
