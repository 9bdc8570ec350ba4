//! Pseudo-expectations and their independent residual audit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::basis::MonomialBasis;
use super::ops::lmi_block;
use super::system::{ConstraintSystem, Tag};
use crate::error::{Error, Result};
use crate::matrix::{symmetric_eigen, SymmetricMatrix};

/// Largest dimension for which the audit computes the full spectrum; above
/// it PSD-ness is tested by a shifted Cholesky factorisation.
pub const AUDIT_EIGEN_MAX_DIM: usize = 800;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Largest violation per constraint class.
    pub by_tag: BTreeMap<Tag, f64>,
    pub max_violation: f64,
    pub worst_label: String,
    /// `(λ_max(E[X̂²]) − bound)₊`, zero without an LMI.
    pub lmi_violation: f64,
    pub pe_one_error: f64,
    /// Exact when the dimension allows a full eigendecomposition.
    pub min_eigenvalue: Option<f64>,
    pub psd: bool,
    pub tolerance: f64,
    pub pass: bool,
}

/// A moment matrix over a monomial basis together with its audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoExpectation {
    pub basis: MonomialBasis,
    pub moment: SymmetricMatrix,
    pub residuals: ResidualReport,
}

impl PseudoExpectation {
    /// `pE[1]`.
    pub fn pe_one(&self) -> f64 {
        self.moment.get(0, 0)
    }
}

/// Re-evaluate every constraint of `sys` on `moment` from scratch.
pub fn audit(sys: &ConstraintSystem, moment: &SymmetricMatrix, tol: f64) -> Result<ResidualReport> {
    let dim = sys.dim();
    if moment.n() != dim {
        return Err(Error::Dimension { expected: dim, got: moment.n() });
    }
    let mut by_tag = BTreeMap::new();
    let mut max_violation = 0.0f64;
    let mut worst_label = String::new();
    for c in &sys.constraints {
        let v = c.violation(c.eval_moment(&sys.pool, moment));
        let e = by_tag.entry(c.tag).or_insert(0.0f64);
        *e = e.max(v);
        if v > max_violation || worst_label.is_empty() {
            max_violation = max_violation.max(v);
            worst_label = c.label.clone();
        }
    }
    let dense = moment.to_dense();
    let lmi_violation = match sys.lmi {
        Some(lmi) => {
            let block = lmi_block(sys, &dense);
            (symmetric_eigen(&block).eigenvalues.max() - lmi.bound).max(0.0)
        }
        None => 0.0,
    };
    let (min_eigenvalue, psd) = if dim <= AUDIT_EIGEN_MAX_DIM {
        let m = symmetric_eigen(&dense).eigenvalues.min();
        (Some(m), m >= -tol)
    } else {
        let shifted = dense + nalgebra::DMatrix::identity(dim, dim) * tol;
        (None, shifted.cholesky().is_some())
    };
    let pe_one_error = (moment.get(0, 0) - 1.0).abs();
    let pass = max_violation <= tol && lmi_violation <= tol && psd && pe_one_error <= tol;
    Ok(ResidualReport {
        by_tag,
        max_violation,
        worst_label,
        lmi_violation,
        pe_one_error,
        min_eigenvalue,
        psd,
        tolerance: tol,
        pass,
    })
}

/// The rank-one moment matrix `zz^⊤` of an integral point.
pub fn integral_moment(z: &[f64]) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(z.len(), |a, b| z[a] * z[b])
}
