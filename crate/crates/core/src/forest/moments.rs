//! Exact coordinate expectations of tree polynomials.

use std::collections::HashMap;

use super::tree::{RootedTree, Tree};
use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};

/// Largest tree degree accepted by the labeling sum.
pub const MAX_MOMENT_DEGREE: usize = 6;

/// `E[T(X)_i]` by summing over labelings of the tree's vertices.
///
/// `T(X)_i = Σ_ℓ Π_{edges uv} X_{ℓ(u)ℓ(v)}` over labelings with the root
/// labeled `i`. Labelings are grouped by the partition of vertices into
/// equal labels; a partition with `b` blocks is realised by
/// `(n−1)(n−2)⋯(n−b+1)` labelings, and contributes the product of entry
/// moments over the distinct block pairs it induces.
pub fn tree_coordinate_expectation(t: &Tree, spec: &EnsembleSpec, i: usize) -> Result<f64> {
    spec.validate()?;
    if i >= spec.n {
        return Err(Error::Index { index: i, limit: spec.n });
    }
    rooted_expectation(&t.canonical(), spec)
}

pub fn rooted_expectation(t: &RootedTree, spec: &EnsembleSpec) -> Result<f64> {
    let d = t.degree();
    if d > MAX_MOMENT_DEGREE {
        return Err(Error::Resource(format!("labeling sum for degree {d} exceeds the guard {MAX_MOMENT_DEGREE}")));
    }
    let parents = t.parents();
    let edges: Vec<(usize, usize)> =
        parents.iter().enumerate().filter_map(|(v, p)| p.map(|p| (p, v))).collect();
    let v = parents.len();
    let n = spec.n as f64;
    let mut total = 0.0;
    let mut blocks = vec![0usize; v];
    // restricted growth strings; the root sits in block 0
    visit_partitions(&mut blocks, 1, 0, &mut |blocks, nblocks| {
        let mut mult: HashMap<(usize, usize), u32> = HashMap::new();
        for &(a, b) in &edges {
            let (x, y) = (blocks[a].min(blocks[b]), blocks[a].max(blocks[b]));
            *mult.entry((x, y)).or_insert(0) += 1;
        }
        if mult.values().any(|m| m % 2 == 1) {
            return;
        }
        let weight: f64 = mult.values().map(|&m| spec.entry_moment(m)).product();
        let labelings: f64 = (1..nblocks).map(|k| (n - k as f64).max(0.0)).product();
        total += weight * labelings;
    });
    Ok(total)
}

fn visit_partitions(blocks: &mut [usize], pos: usize, max_block: usize, visit: &mut dyn FnMut(&[usize], usize)) {
    if pos == blocks.len() {
        visit(blocks, max_block + 1);
        return;
    }
    for b in 0..=max_block + 1 {
        blocks[pos] = b;
        visit_partitions(blocks, pos + 1, max_block.max(b), visit);
    }
}

/// Upper bound `(K·d)^d` on `E[T(X)_i]`.
pub fn expectation_bound(degree: usize, k: f64) -> f64 {
    if degree == 0 {
        1.0
    } else {
        (k * degree as f64).powi(degree as i32)
    }
}
