//! Enumeration of non-isomorphic rooted trees and lumber.

use super::lumber::Lumber;
use super::tree::RootedTree;
use crate::error::{Error, Result};

/// Largest degree accepted by [`enumerate_lumber`].
pub const MAX_ENUMERATION_DEGREE: usize = 6;

/// Upper bound `(2d+2)^{d(d+1)}` on the number of lumber of degree ≤ d.
pub fn lumber_bound(d: usize) -> f64 {
    ((2 * d + 2) as f64).powi((d * (d + 1)) as i32)
}

/// `out[m]` lists every canonical rooted tree with exactly `m` edges.
pub fn trees_by_degree(d: usize) -> Vec<Vec<RootedTree>> {
    let mut out: Vec<Vec<RootedTree>> = vec![vec![RootedTree::leaf()]];
    for m in 1..=d {
        // a branch is an edge to a child subtree; it weighs 1 + its degree
        let branches: Vec<(usize, &RootedTree)> =
            out.iter().enumerate().flat_map(|(k, ts)| ts.iter().map(move |t| (k + 1, t))).collect();
        let mut found = Vec::new();
        let mut stack = Vec::new();
        multisets(&branches, 0, m, true, &mut stack, &mut |pick| {
            let mut children: Vec<RootedTree> = pick.iter().map(|&i| branches[i].1.clone()).collect();
            children.sort();
            found.push(RootedTree { children });
        });
        found.sort();
        out.push(found);
    }
    out
}

/// Visit multisets of `items` (by index, non-decreasing) whose weights sum to
/// `budget` exactly, or to at most `budget` when `exact` is false.
fn multisets(
    items: &[(usize, &RootedTree)],
    start: usize,
    budget: usize,
    exact: bool,
    stack: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if !exact || budget == 0 {
        visit(stack);
    }
    if budget == 0 {
        return;
    }
    for i in start..items.len() {
        let w = items[i].0;
        if w <= budget {
            stack.push(i);
            multisets(items, i, budget - w, exact, stack, visit);
            stack.pop();
        }
    }
}

/// Every non-isomorphic lumber of degree ≤ d, ordered by degree, then base,
/// then trunk multiset.
pub fn enumerate_lumber(d: usize) -> Result<Vec<Lumber>> {
    if d > MAX_ENUMERATION_DEGREE {
        return Err(Error::Resource(format!(
            "lumber enumeration degree {d} exceeds the guard {MAX_ENUMERATION_DEGREE}"
        )));
    }
    let trees = trees_by_degree(d);
    let trunk_items: Vec<(usize, &RootedTree)> =
        trees.iter().enumerate().skip(1).flat_map(|(k, ts)| ts.iter().map(move |t| (k, t))).collect();
    let mut out = Vec::new();
    for (bd, bases) in trees.iter().enumerate() {
        for base in bases {
            let mut stack = Vec::new();
            multisets(&trunk_items, 0, d - bd, false, &mut stack, &mut |pick| {
                let trunks = pick.iter().map(|&i| trunk_items[i].1.clone()).collect();
                out.push(Lumber::new(base.clone(), trunks).expect("non-empty trunks"));
            });
        }
    }
    out.sort_by(|a, b| a.degree().cmp(&b.degree()).then_with(|| a.cmp(b)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rooted_tree_counts() {
        // OEIS A000081 shifted: trees with m edges have m+1 vertices
        let counts: Vec<usize> = trees_by_degree(6).iter().map(Vec::len).collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 9, 20, 48]);
    }

    #[test]
    fn degree_zero_is_only_empty() {
        assert_eq!(enumerate_lumber(0).unwrap(), vec![Lumber::empty()]);
    }

    #[test]
    fn degree_two_has_nine() {
        assert_eq!(enumerate_lumber(2).unwrap().len(), 9);
    }

    #[test]
    fn guard() {
        assert!(matches!(enumerate_lumber(7), Err(Error::Resource(_))));
    }
}
