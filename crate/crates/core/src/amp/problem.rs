//! Feasible sets, rounding maps and the quadratic objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{compensated_sum, SymmetricMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Nonnegative unit vectors.
    Nnpca,
    /// The scaled hypercube `{±1/√n}^n`.
    Sk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
}

impl ProblemSpec {
    pub fn nnpca() -> Self {
        Self { kind: ProblemKind::Nnpca }
    }

    pub fn sk() -> Self {
        Self { kind: ProblemKind::Sk }
    }

    /// Membership in `K`, up to `tol` on the norm.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        let n = v.len() as f64;
        match self.kind {
            ProblemKind::Nnpca => {
                v.iter().all(|&x| x >= 0.0) && (v.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() <= tol
            }
            ProblemKind::Sk => v.iter().all(|&x| x.abs() == 1.0 / n.sqrt()),
        }
    }
}

/// Map an AMP iterate into `K`.
pub fn round_to_feasible(x: &[f64], prob: &ProblemSpec) -> Result<Vec<f64>> {
    let n = x.len();
    match prob.kind {
        ProblemKind::Nnpca => {
            let pos: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
            let norm = pos.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Domain("nnpca rounding of a vector with no positive entry".into()));
            }
            Ok(pos.into_iter().map(|v| v / norm).collect())
        }
        ProblemKind::Sk => {
            let unit = 1.0 / (n as f64).sqrt();
            Ok(x.iter().map(|&v| if v < 0.0 { -unit } else { unit }).collect())
        }
    }
}

/// `v^⊤ X v` with compensated summation.
pub fn objective(x: &SymmetricMatrix, v: &[f64]) -> Result<f64> {
    let n = x.n();
    if v.len() != n {
        return Err(Error::Dimension { expected: n, got: v.len() });
    }
    let terms = (0..n).flat_map(|i| {
        (i..n).map(move |j| {
            let w = if i == j { 1.0 } else { 2.0 };
            w * x.get(i, j) * v[i] * v[j]
        })
    });
    Ok(compensated_sum(terms))
}
