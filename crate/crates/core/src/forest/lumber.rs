//! Lumber and weighted forests.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde_json::Value;

use super::tree::{RootedTree, Tree, TreeEvaluator};
use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

/// A base tree scaled by a multiset of trunks `𝗄_T`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lumber {
    pub base: RootedTree,
    /// Sorted, all non-empty.
    pub trunks: Vec<RootedTree>,
}

impl Lumber {
    pub fn new(base: RootedTree, mut trunks: Vec<RootedTree>) -> Result<Self> {
        if trunks.iter().any(RootedTree::is_empty) {
            return Err(Error::Domain("trunks must be non-empty trees".into()));
        }
        trunks.sort();
        Ok(Self { base, trunks })
    }

    pub fn tree(base: RootedTree) -> Self {
        Self { base, trunks: Vec::new() }
    }

    pub fn empty() -> Self {
        Self::tree(RootedTree::leaf())
    }

    pub fn degree(&self) -> usize {
        self.base.degree() + self.trunks.iter().map(RootedTree::degree).sum::<usize>()
    }

    /// `(base ∘ base', trunks ∪ trunks')`.
    pub fn product(&self, other: &Self) -> Self {
        let mut trunks = self.trunks.clone();
        trunks.extend(other.trunks.iter().cloned());
        trunks.sort();
        Self { base: self.base.grafted(&other.base), trunks }
    }

    pub fn encoding(&self) -> String {
        let trunks: Vec<String> = self.trunks.iter().map(RootedTree::encoding).collect();
        format!("{}[{}]", self.base.encoding(), trunks.join(","))
    }

    pub fn evaluate(&self, ev: &mut TreeEvaluator<'_>) -> Vec<f64> {
        let scale: f64 = self.trunks.iter().map(|t| ev.trunk(t)).product();
        ev.value(&self.base).into_iter().map(|v| v * scale).collect()
    }
}

/// `Σ c_L · L(X)` with one coefficient per canonical lumber.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Forest {
    pub terms: BTreeMap<Lumber, f64>,
}

impl Forest {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::single(Lumber::empty(), c)
    }

    pub fn single(l: Lumber, c: f64) -> Self {
        let mut f = Self::zero();
        f.add_term(l, c);
        f
    }

    pub fn add_term(&mut self, l: Lumber, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(l) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == 0.0 {
                    e.remove();
                }
            }
            Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Lumber::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.terms.values().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (l, c) in &other.terms {
            out.add_term(l.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero();
        for (l, c) in &self.terms {
            out.add_term(l.clone(), c * s);
        }
        out
    }

    /// Entrywise product: grafting of bases, union of trunks.
    pub fn hadamard(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                out.add_term(a.product(b), ca * cb);
            }
        }
        out
    }

    /// `X · F`: every base is rerooted.
    pub fn mul_x(&self) -> Self {
        let mut out = Self::zero();
        for (l, c) in &self.terms {
            out.add_term(Lumber { base: l.base.rerooted(), trunks: l.trunks.clone() }, *c);
        }
        out
    }

    /// `(1/n)⟨F, 1⃗⟩` as a forest whose bases are all empty.
    pub fn trunk(&self) -> Self {
        let mut out = Self::zero();
        for (l, c) in &self.terms {
            let mut trunks = l.trunks.clone();
            if !l.base.is_empty() {
                trunks.push(l.base.clone());
            }
            trunks.sort();
            out.add_term(Lumber { base: RootedTree::leaf(), trunks }, *c);
        }
        out
    }

    pub fn evaluate_with(&self, ev: &mut TreeEvaluator<'_>) -> Vec<f64> {
        let mut out = vec![0.0; ev.matrix().n()];
        for (l, c) in &self.terms {
            for (o, v) in out.iter_mut().zip(l.evaluate(ev)) {
                *o += c * v;
            }
        }
        out
    }

    /// `[[coef, base, [trunks…]], …]` with grammar-tree encodings.
    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(l, c)| {
                    let trunks = l.trunks.iter().map(|t| t.to_tree().to_json()).collect();
                    Value::Array(vec![Value::from(*c), l.base.to_tree().to_json(), Value::Array(trunks)])
                })
                .collect(),
        )
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("invalid forest term: {what}"));
        let mut out = Self::zero();
        for term in v.as_array().ok_or_else(|| bad("not an array"))? {
            let parts = term.as_array().filter(|p| p.len() == 3).ok_or_else(|| bad("need [coef, base, trunks]"))?;
            let c = parts[0].as_f64().ok_or_else(|| bad("coefficient"))?;
            let base = Tree::from_json(&parts[1])?.canonical();
            let trunks = parts[2]
                .as_array()
                .ok_or_else(|| bad("trunks"))?
                .iter()
                .map(|t| Tree::from_json(t).map(|t| t.canonical()))
                .collect::<Result<Vec<_>>>()?;
            out.add_term(Lumber::new(base, trunks)?, c);
        }
        Ok(out)
    }
}

/// `Σ c · (Π trunks) · base(X)`.
pub fn evaluate_forest(f: &Forest, x: &SymmetricMatrix) -> Vec<f64> {
    f.evaluate_with(&mut TreeEvaluator::new(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_symmetric, EnsembleSpec};

    fn r() -> RootedTree {
        RootedTree::leaf().rerooted()
    }

    #[test]
    fn empty_forest_is_zero() {
        let x = SymmetricMatrix::identity(4);
        assert_eq!(evaluate_forest(&Forest::zero(), &x), vec![0.0; 4]);
        assert_eq!(evaluate_forest(&Forest::constant(1.0), &x), vec![1.0; 4]);
    }

    #[test]
    fn cancellation_removes_term() {
        let f = Forest::single(Lumber::tree(r()), 2.0).add(&Forest::single(Lumber::tree(r()), -2.0));
        assert!(f.is_empty());
    }

    #[test]
    fn trunk_of_forest_matches_mean() {
        let x = sample_symmetric(&EnsembleSpec::gaussian(20), 4).unwrap();
        let f = Forest::single(Lumber::tree(r().rerooted()), 1.5).add(&Forest::constant(-0.5));
        let v = evaluate_forest(&f, &x);
        let t = evaluate_forest(&f.trunk(), &x);
        let m = crate::matrix::mean(&v);
        assert!(t.iter().all(|&a| (a - m).abs() < 1e-12));
    }

    #[test]
    fn json_round_trip() {
        let l = Lumber::new(r().grafted(&r()), vec![r(), r().rerooted()]).unwrap();
        let f = Forest::single(l, -0.25).add(&Forest::constant(3.0));
        assert_eq!(Forest::from_json(&f.to_json()).unwrap(), f);
    }
}
