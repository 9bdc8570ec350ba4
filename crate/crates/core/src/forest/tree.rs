//! Rooted trees and their canonical form.
//!
//! A [`Tree`] is built with the grammar `Empty | Reroot(T) | Graft(T, T)`.
//! Its value on `X` is the vector `1⃗`, `X·T(X)` or `T₁(X) ∘ T₂(X)`. The
//! canonical [`RootedTree`] stores each node as a sorted list of child
//! subtrees, one per edge leaving the node.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::{mean, SymmetricMatrix};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tree {
    Empty,
    Reroot(Box<Tree>),
    Graft(Box<Tree>, Box<Tree>),
}

impl Tree {
    pub fn reroot(t: Tree) -> Tree {
        Tree::Reroot(Box::new(t))
    }

    /// Entrywise product; grafting onto `Empty` is the identity.
    pub fn graft(a: Tree, b: Tree) -> Tree {
        match (a, b) {
            (Tree::Empty, t) | (t, Tree::Empty) => t,
            (a, b) => Tree::Graft(Box::new(a), Box::new(b)),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            Tree::Empty => 0,
            Tree::Reroot(c) => 1 + c.degree(),
            Tree::Graft(a, b) => a.degree() + b.degree(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Tree::Empty)
    }

    /// Graft children must both be non-empty.
    pub fn is_well_formed(&self) -> bool {
        match self {
            Tree::Empty => true,
            Tree::Reroot(c) => c.is_well_formed(),
            Tree::Graft(a, b) => !a.is_empty() && !b.is_empty() && a.is_well_formed() && b.is_well_formed(),
        }
    }

    pub fn canonical(&self) -> RootedTree {
        match self {
            Tree::Empty => RootedTree::leaf(),
            Tree::Reroot(c) => RootedTree { children: vec![c.canonical()] },
            Tree::Graft(a, b) => {
                let mut children = a.canonical().children;
                children.extend(b.canonical().children);
                children.sort();
                RootedTree { children }
            }
        }
    }

    /// `"E"`, `["R", child]`, `["G", left, right]`.
    pub fn to_json(&self) -> Value {
        match self {
            Tree::Empty => Value::from("E"),
            Tree::Reroot(c) => Value::Array(vec!["R".into(), c.to_json()]),
            Tree::Graft(a, b) => Value::Array(vec!["G".into(), a.to_json(), b.to_json()]),
        }
    }

    pub fn from_json(v: &Value) -> Result<Tree> {
        let bad = || Error::Parse(format!("invalid tree encoding {v}"));
        match v {
            Value::String(s) if s == "E" => Ok(Tree::Empty),
            Value::Array(items) => match (items.first().and_then(Value::as_str), items.len()) {
                (Some("R"), 2) => Ok(Tree::reroot(Tree::from_json(&items[1])?)),
                (Some("G"), 3) => {
                    let (a, b) = (Tree::from_json(&items[1])?, Tree::from_json(&items[2])?);
                    if a.is_empty() || b.is_empty() {
                        return Err(Error::Parse("graft children must be non-empty".into()));
                    }
                    Ok(Tree::Graft(Box::new(a), Box::new(b)))
                }
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

/// Canonical rooted tree: children sorted, so equality is isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RootedTree {
    pub children: Vec<RootedTree>,
}

impl RootedTree {
    pub fn leaf() -> Self {
        Self { children: Vec::new() }
    }

    /// `Reroot(self)`.
    pub fn rerooted(&self) -> Self {
        Self { children: vec![self.clone()] }
    }

    /// `Graft(self, other)`: merge the root children.
    pub fn grafted(&self, other: &Self) -> Self {
        let mut children = self.children.clone();
        children.extend(other.children.iter().cloned());
        children.sort();
        Self { children }
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    /// Edge count.
    pub fn degree(&self) -> usize {
        self.children.iter().map(|c| 1 + c.degree()).sum()
    }

    /// Vertex count.
    pub fn size(&self) -> usize {
        self.degree() + 1
    }

    /// AHU-style string; the empty tree is `()`.
    pub fn encoding(&self) -> String {
        let mut s = String::new();
        self.write_encoding(&mut s);
        s
    }

    fn write_encoding(&self, s: &mut String) {
        s.push('(');
        for c in &self.children {
            c.write_encoding(s);
        }
        s.push(')');
    }

    pub fn to_tree(&self) -> Tree {
        self.children
            .iter()
            .map(|c| Tree::reroot(c.to_tree()))
            .reduce(Tree::graft)
            .unwrap_or(Tree::Empty)
    }

    /// Parent array with the root at vertex 0, in depth-first order.
    pub fn parents(&self) -> Vec<Option<usize>> {
        fn walk(t: &RootedTree, me: usize, out: &mut Vec<Option<usize>>) {
            for c in &t.children {
                let id = out.len();
                out.push(Some(me));
                walk(c, id, out);
            }
        }
        let mut out = vec![None];
        walk(self, 0, &mut out);
        out
    }
}

impl fmt::Display for RootedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encoding())
    }
}

/// Canonical encoding of a grammar tree.
pub fn canonicalize(t: &Tree) -> String {
    t.canonical().encoding()
}

/// Memoised evaluation of trees on one matrix.
pub struct TreeEvaluator<'a> {
    x: &'a SymmetricMatrix,
    values: HashMap<RootedTree, Vec<f64>>,
    products: HashMap<RootedTree, Vec<f64>>,
}

impl<'a> TreeEvaluator<'a> {
    pub fn new(x: &'a SymmetricMatrix) -> Self {
        Self { x, values: HashMap::new(), products: HashMap::new() }
    }

    pub fn matrix(&self) -> &SymmetricMatrix {
        self.x
    }

    /// `X · child(X)`, cached.
    fn edge(&mut self, child: &RootedTree) -> Vec<f64> {
        if let Some(v) = self.products.get(child) {
            return v.clone();
        }
        let inner = self.value(child);
        let out = self.x.matvec(&inner);
        self.products.insert(child.clone(), out.clone());
        out
    }

    pub fn value(&mut self, t: &RootedTree) -> Vec<f64> {
        if let Some(v) = self.values.get(t) {
            return v.clone();
        }
        let mut out = vec![1.0; self.x.n()];
        for c in &t.children {
            let e = self.edge(c);
            for (o, v) in out.iter_mut().zip(&e) {
                *o *= v;
            }
        }
        self.values.insert(t.clone(), out.clone());
        out
    }

    /// `𝗄_T = (1/n)⟨T(X), 1⃗⟩`; equals 1 for the empty tree.
    pub fn trunk(&mut self, t: &RootedTree) -> f64 {
        mean(&self.value(t))
    }
}

/// Value of a grammar tree, following the recursion literally.
pub fn evaluate_tree(t: &Tree, x: &SymmetricMatrix) -> Vec<f64> {
    match t {
        Tree::Empty => vec![1.0; x.n()],
        Tree::Reroot(c) => x.matvec(&evaluate_tree(c, x)),
        Tree::Graft(a, b) => evaluate_tree(a, x).iter().zip(evaluate_tree(b, x)).map(|(p, q)| p * q).collect(),
    }
}

/// `𝗄_T(X)`; the empty tree is not a trunk.
pub fn trunk_value(t: &Tree, x: &SymmetricMatrix) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::Domain("the tree should be nonempty".into()));
    }
    Ok(mean(&evaluate_tree(t, x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r() -> Tree {
        Tree::reroot(Tree::Empty)
    }

    #[test]
    fn degrees() {
        assert_eq!(Tree::Empty.degree(), 0);
        assert_eq!(Tree::reroot(r()).degree(), 2);
        assert_eq!(Tree::graft(r(), Tree::reroot(r())).degree(), 3);
    }

    #[test]
    fn graft_commutes_in_canonical_form() {
        let a = r();
        let b = Tree::reroot(r());
        assert_eq!(canonicalize(&Tree::graft(a.clone(), b.clone())), canonicalize(&Tree::graft(b, a)));
    }

    #[test]
    fn empty_sentinel() {
        assert_eq!(canonicalize(&Tree::Empty), "()");
        assert_eq!(canonicalize(&r()), "(())");
    }

    #[test]
    fn path_and_cherry_differ() {
        assert_ne!(canonicalize(&Tree::reroot(r())), canonicalize(&Tree::graft(r(), r())));
    }

    #[test]
    fn json_round_trip() {
        let t = Tree::graft(r(), Tree::reroot(Tree::graft(r(), r())));
        assert_eq!(Tree::from_json(&t.to_json()).unwrap(), t);
        assert!(Tree::from_json(&serde_json::json!(["G", "E", "E"])).is_err());
    }

    #[test]
    fn to_tree_round_trip() {
        let t = Tree::graft(Tree::reroot(Tree::graft(r(), r())), r());
        let c = t.canonical();
        assert_eq!(c.to_tree().canonical(), c);
        assert!(c.to_tree().is_well_formed());
    }

    #[test]
    fn trunk_of_empty_is_rejected() {
        let x = SymmetricMatrix::identity(3);
        assert!(trunk_value(&Tree::Empty, &x).is_err());
    }

    #[test]
    fn constant_matrix_trunk() {
        let n = 9;
        let x = SymmetricMatrix::from_fn(n, |_, _| 1.0 / 3.0);
        assert!((trunk_value(&r(), &x).unwrap() - 3.0).abs() < 1e-12);
    }
}
