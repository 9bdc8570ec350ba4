//! Rounding a pseudo-expectation to a unit vector.

use serde::{Deserialize, Serialize};

use super::pe::PseudoExpectation;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, symmetric_eigen, SymmetricMatrix};

/// `pE[vv^⊤]`, read off the `v`-block of the moment matrix.
pub fn extract_second_moment(pe: &PseudoExpectation) -> SymmetricMatrix {
    let b = pe.basis;
    SymmetricMatrix::from_fn(b.n, |i, j| pe.moment.get(b.v(i), b.v(j)))
}

/// Unit top eigenvector of `m`. Among equal top eigenvalues the eigenvector
/// with the lowest index in the solver's order wins; the sign makes the
/// first coordinate of largest magnitude positive.
pub fn round_top_eigenvector(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    Ok(top_eigenpair(m)?.1)
}

fn top_eigenpair(m: &SymmetricMatrix) -> Result<(f64, Vec<f64>)> {
    let n = m.n();
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    let dense = m.to_dense();
    if dense.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let eig = symmetric_eigen(&dense);
    let top = eig.eigenvalues.max();
    let spread = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tie = 1e-12 * spread.max(1.0);
    let k = (0..n).find(|&k| eig.eigenvalues[k] >= top - tie).expect("non-empty spectrum");
    let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
    let norm = norm2(&v);
    if !(norm > 0.0) || !norm.is_finite() {
        let min = eig.eigenvalues.min();
        return Err(Error::Numerical(format!("eigensolver failed; spectrum in [{min:.3e}, {top:.3e}]")));
    }
    let big = v.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let pivot = v.iter().position(|a| a.abs() >= big * (1.0 - 1e-12)).expect("non-empty");
    let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
    v.iter_mut().for_each(|a| *a *= sign / norm);
    Ok((top, v))
}

/// `⟨u, w⟩² / (‖u‖²‖w‖²)`.
pub fn correlation(u: &[f64], w: &[f64]) -> Result<f64> {
    if u.len() != w.len() {
        return Err(Error::Dimension { expected: u.len(), got: w.len() });
    }
    let (nu, nw) = (dot(u, u), dot(w, w));
    if nu == 0.0 || nw == 0.0 {
        return Err(Error::Domain("correlation with a zero vector".into()));
    }
    Ok((dot(u, w).powi(2) / (nu * nw)).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub v_lsh: Vec<f64>,
    pub top_eigenvalue: f64,
    pub trace: f64,
    pub correlation: Option<f64>,
    pub iterations: usize,
    pub max_violation: f64,
}

/// Round `pe` and, when given, compare with `reference`.
pub fn recover(pe: &PseudoExpectation, reference: Option<&[f64]>, iterations: usize) -> Result<RecoveryResult> {
    let second = extract_second_moment(pe);
    let (top_eigenvalue, v_lsh) = top_eigenpair(&second)?;
    let trace = (0..second.n()).map(|i| second.get(i, i)).sum();
    let correlation = reference.map(|r| correlation(&v_lsh, r)).transpose()?;
    Ok(RecoveryResult { v_lsh, top_eigenvalue, trace, correlation, iterations, max_violation: pe.residuals.max_violation })
}
