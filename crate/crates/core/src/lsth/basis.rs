//! Degree-one monomial basis of the moment matrix.

use serde::{Deserialize, Serialize};

/// A program variable, or the constant monomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisVar {
    One,
    V(usize),
    W(usize),
    /// Upper-triangle entry `X̂_ij` with `i ≤ j`; `X̂_ji` aliases it.
    Xhat(usize, usize),
}

/// `{1} ∪ {v_i}` and, in robust mode, `{W_j} ∪ {X̂_ij}`, in that order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialBasis {
    pub n: usize,
    pub robust: bool,
}

impl MonomialBasis {
    pub fn new(n: usize, robust: bool) -> Self {
        Self { n, robust }
    }

    pub fn dim(&self) -> usize {
        if self.robust {
            1 + 2 * self.n + self.n * (self.n + 1) / 2
        } else {
            1 + self.n
        }
    }

    pub const ONE: usize = 0;

    pub fn v(&self, i: usize) -> usize {
        1 + i
    }

    pub fn w(&self, j: usize) -> usize {
        debug_assert!(self.robust);
        1 + self.n + j
    }

    pub fn xhat(&self, i: usize, j: usize) -> usize {
        debug_assert!(self.robust);
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        1 + 2 * self.n + a * self.n - a * a.saturating_sub(1) / 2 + (b - a)
    }

    /// Inverse of the index map.
    pub fn var(&self, k: usize) -> Option<BasisVar> {
        let n = self.n;
        match k {
            0 => Some(BasisVar::One),
            k if k <= n => Some(BasisVar::V(k - 1)),
            _ if !self.robust => None,
            k if k <= 2 * n => Some(BasisVar::W(k - 1 - n)),
            k if k < self.dim() => {
                let mut r = k - 1 - 2 * n;
                for a in 0..n {
                    let len = n - a;
                    if r < len {
                        return Some(BasisVar::Xhat(a, a + r));
                    }
                    r -= len;
                }
                None
            }
            _ => None,
        }
    }

    pub fn position(&self, var: BasisVar) -> Option<usize> {
        match var {
            BasisVar::One => Some(0),
            BasisVar::V(i) if i < self.n => Some(self.v(i)),
            BasisVar::W(j) if self.robust && j < self.n => Some(self.w(j)),
            BasisVar::Xhat(i, j) if self.robust && i < self.n && j < self.n => Some(self.xhat(i, j)),
            _ => None,
        }
    }

    pub fn monomials(&self) -> Vec<BasisVar> {
        (0..self.dim()).map(|k| self.var(k).expect("in range")).collect()
    }
}
