//! Polynomials of degree ≤ 2 over the moment basis.
//!
//! Linear forms live in a shared [`FormPool`]; a polynomial is a constant
//! plus a combination of forms plus a combination of products of two forms.
//! Since basis index 0 is the constant monomial, a product of forms `ℓ·m`
//! has pseudo-expectation `ℓ^⊤ M m`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse vector over basis positions.
pub type SparseVec = Vec<(usize, f64)>;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FormPool {
    pub forms: Vec<SparseVec>,
    #[serde(skip)]
    units: HashMap<usize, usize>,
}

impl FormPool {
    pub fn add(&mut self, f: SparseVec) -> usize {
        self.forms.push(f);
        self.forms.len() - 1
    }

    /// The coordinate form `e_k`, shared.
    pub fn unit(&mut self, k: usize) -> usize {
        if let Some(&id) = self.units.get(&k) {
            return id;
        }
        let id = self.add(vec![(k, 1.0)]);
        self.units.insert(k, id);
        id
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// `⟨form, z⟩` for every form.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        self.forms.iter().map(|f| f.iter().map(|&(k, c)| c * z[k]).sum()).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    pub constant: f64,
    pub lin: Vec<(f64, usize)>,
    pub quad: Vec<(f64, usize, usize)>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, ..Default::default() }
    }

    pub fn form(id: usize) -> Self {
        Self { lin: vec![(1.0, id)], ..Default::default() }
    }

    pub fn degree(&self) -> usize {
        if !self.quad.is_empty() {
            2
        } else if !self.lin.is_empty() {
            1
        } else {
            0
        }
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            lin: self.lin.iter().map(|&(c, f)| (c * s, f)).collect(),
            quad: self.quad.iter().map(|&(c, f, g)| (c * s, f, g)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.constant += other.constant;
        self.lin.extend_from_slice(&other.lin);
        self.quad.extend_from_slice(&other.quad);
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.degree() + other.degree() > 2 {
            return Err(Error::Unsupported(format!(
                "product of degrees {} and {} is not representable at moment degree 2",
                self.degree(),
                other.degree()
            )));
        }
        let (a, b) = (self, other);
        let mut out = Poly::constant(a.constant * b.constant);
        if b.constant != 0.0 {
            out.lin.extend(a.lin.iter().map(|&(c, f)| (c * b.constant, f)));
            out.quad.extend(a.quad.iter().map(|&(c, f, g)| (c * b.constant, f, g)));
        }
        if a.constant != 0.0 {
            out.lin.extend(b.lin.iter().map(|&(c, f)| (c * a.constant, f)));
            out.quad.extend(b.quad.iter().map(|&(c, f, g)| (c * a.constant, f, g)));
        }
        for &(ca, fa) in &a.lin {
            for &(cb, fb) in &b.lin {
                out.quad.push((ca * cb, fa, fb));
            }
        }
        Ok(out)
    }

    /// Value at an integral point `z` given projections `pz[f] = ⟨form_f, z⟩`.
    pub fn eval(&self, pz: &[f64]) -> f64 {
        self.constant
            + self.lin.iter().map(|&(c, f)| c * pz[f]).sum::<f64>()
            + self.quad.iter().map(|&(c, f, g)| c * pz[f] * pz[g]).sum::<f64>()
    }

    /// As products of forms, with the constant and linear parts multiplied by
    /// the constant monomial.
    pub fn into_terms(self, pool: &mut FormPool) -> Vec<(f64, usize, usize)> {
        let one = pool.unit(0);
        let mut terms = self.quad;
        terms.extend(self.lin.into_iter().map(|(c, f)| (c, one, f)));
        if self.constant != 0.0 || terms.is_empty() {
            terms.push((self.constant, one, one));
        }
        terms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_degrees() {
        let mut pool = FormPool::default();
        let a = Poly::form(pool.unit(1));
        let b = Poly::form(pool.unit(2));
        let ab = a.mul(&b).unwrap();
        assert_eq!(ab.degree(), 2);
        assert!(ab.mul(&a).is_err());
        assert_eq!(Poly::constant(3.0).mul(&ab).unwrap().quad[0].0, 3.0);
    }

    #[test]
    fn eval_at_point() {
        let mut pool = FormPool::default();
        let f = pool.add(vec![(1, 2.0), (2, -1.0)]);
        let p = Poly::form(f).mul(&Poly::form(f)).unwrap();
        let mut q = Poly::constant(1.0);
        q.add_assign(&p);
        let z = [1.0, 3.0, 4.0];
        assert_eq!(q.eval(&pool.project(&z)), 1.0 + 4.0);
    }
}
