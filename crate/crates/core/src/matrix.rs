//! Dense symmetric matrices stored as a row-major upper triangle.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real symmetric `n × n` matrix. Each off-diagonal value is stored once,
/// so `get(i, j) == get(j, i)` holds bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    n: usize,
    upper: Vec<f64>,
}

#[inline]
fn offset(n: usize, i: usize) -> usize {
    // start of row i in the packed upper triangle
    i * n - i * i.saturating_sub(1) / 2
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, upper: vec![0.0; n * (n + 1) / 2] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Build from `f(i, j)` evaluated for `i ≤ j` only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(f(i, j));
            }
        }
        Self { n, upper }
    }

    /// Wrap a packed upper triangle.
    pub fn from_upper(n: usize, upper: Vec<f64>) -> Result<Self> {
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::Dimension { expected: n * (n + 1) / 2, got: upper.len() });
        }
        Ok(Self { n, upper })
    }

    /// Symmetrise a dense matrix by reading its upper triangle.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
        }
        Ok(Self::from_fn(m.nrows(), |i, j| m[(i, j)]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        offset(self.n, a) + (b - a)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.index(i, j);
        self.upper[k] = value;
    }

    /// Row `i` as a dense vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|j| self.get(i, j)).collect()
    }

    /// `X x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec dimension");
        let n = self.n;
        let mut y = vec![0.0; n];
        let mut k = 0;
        for i in 0..n {
            let xi = x[i];
            let mut acc = self.upper[k] * xi;
            k += 1;
            for j in (i + 1)..n {
                let a = self.upper[k];
                acc += a * x[j];
                y[j] += a * xi;
                k += 1;
            }
            y[i] += acc;
        }
        y
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matvec(&vec![1.0; self.n])
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = symmetric_eigen(&self.to_dense()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Spectral norm `max |λ|`.
    pub fn op_norm(&self) -> f64 {
        let ev = self.eigenvalues();
        match (ev.first(), ev.last()) {
            (Some(lo), Some(hi)) => lo.abs().max(hi.abs()),
            _ => 0.0,
        }
    }

    /// Entrywise difference `self − other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Dimension { expected: self.n, got: other.n });
        }
        let upper = self.upper.iter().zip(&other.upper).map(|(a, b)| a - b).collect();
        Ok(Self { n: self.n, upper })
    }

    /// Serialise in the `symmat` text format.
    pub fn to_symmat(&self) -> String {
        let mut s = String::with_capacity(self.upper.len() * 25 + 16);
        let _ = writeln!(s, "symmat {}", self.n);
        let mut k = 0;
        for i in 0..self.n {
            let row: Vec<String> =
                self.upper[k..k + self.n - i].iter().map(|v| format!("{v:.16e}")).collect();
            k += self.n - i;
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Parse the `symmat` text format.
    pub fn from_symmat(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        match tokens.next() {
            Some("symmat") => {}
            other => return Err(Error::Parse(format!("expected `symmat` header, found {other:?}"))),
        }
        let n: usize = tokens
            .next()
            .ok_or_else(|| Error::Parse("missing dimension".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad dimension: {e}")))?;
        let upper = tokens
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad value {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_upper(n, upper)
    }
}

fn eigen_is_sound(m: &DMatrix<f64>, eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> bool {
    if !eig.eigenvalues.iter().chain(eig.eigenvectors.iter()).all(|v| v.is_finite()) {
        return false;
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (eig.eigenvalues.sum() - m.trace()).abs() <= 1e-8 * scale * (m.nrows() as f64).sqrt()
}

/// Symmetric eigendecomposition that guards against the occasional
/// non-finite output of the implicit QR iteration on matrices with large
/// exactly-zero blocks. A failed attempt is retried on `M + cI` and then on
/// `QMQ` for a fixed dense Householder reflection `Q`, which changes the
/// zero pattern without changing the spectrum.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let eig = SymmetricEigen::new(m.clone());
    if eigen_is_sound(m, &eig) {
        return eig;
    }
    let n = m.nrows();
    let c = m.norm().max(1.0);
    let mut shifted = SymmetricEigen::new(m + DMatrix::identity(n, n) * c);
    shifted.eigenvalues.add_scalar_mut(-c);
    if eigen_is_sound(m, &shifted) {
        return shifted;
    }
    let mut w = DVector::from_fn(n, |i, _| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    w /= w.norm();
    let q = DMatrix::identity(n, n) - &w * w.transpose() * 2.0;
    let mut rotated = SymmetricEigen::new(&q * m * &q);
    rotated.eigenvectors = &q * rotated.eigenvectors;
    rotated
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `(1/n)⟨a, b⟩`.
pub fn mean_dot(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        dot(a, b) / a.len() as f64
    }
}

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        a.iter().sum::<f64>() / a.len() as f64
    }
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_survives_sparse_blocks() {
        let support = [0usize, 3, 4, 9, 11, 16, 17, 18, 31, 34, 35, 48, 56, 61, 62, 63];
        let mut m = DMatrix::zeros(64, 64);
        for &i in &support {
            for &j in &support {
                m[(i, j)] = 0.125;
            }
        }
        let eig = symmetric_eigen(&m);
        assert!(eig.eigenvalues.iter().all(|v| v.is_finite()));
        assert!((eig.eigenvalues.max() - 2.0).abs() < 1e-12);
        let recon = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues) * eig.eigenvectors.transpose();
        assert!((recon - &m).norm() < 1e-12);
    }

    #[test]
    fn packed_indexing_round_trips() {
        let m = SymmetricMatrix::from_fn(5, |i, j| (10 * i + j) as f64);
        for i in 0..5 {
            for j in 0..5 {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                assert_eq!(m.get(i, j), (10 * a + b) as f64);
            }
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let m = SymmetricMatrix::from_fn(7, |i, j| ((i * 3 + j * 5) % 11) as f64 - 4.0);
        let x: Vec<f64> = (0..7).map(|i| i as f64 * 0.5 - 1.0).collect();
        let dense = m.to_dense() * nalgebra::DVector::from_vec(x.clone());
        for (a, b) in m.matvec(&x).iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmat_round_trip_is_exact() {
        let m = SymmetricMatrix::from_fn(4, |i, j| (i as f64 + 1.0).sqrt() / (j as f64 + 3.0));
        let back = SymmetricMatrix::from_symmat(&m.to_symmat()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn symmat_rejects_bad_length() {
        assert!(SymmetricMatrix::from_symmat("symmat 2\n1 2").is_err());
        assert!(SymmetricMatrix::from_symmat("matrix 1\n1").is_err());
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
