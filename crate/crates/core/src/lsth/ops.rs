//! Linear maps between moment matrices and constraint values, and Farkas
//! certificates of infeasibility.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::system::{Constraint, ConstraintSystem};
use crate::matrix::{symmetric_eigen, SymmetricMatrix};

/// Position of `(a, b)`, `a ≤ b`, in the packed upper triangle of a `d × d`
/// matrix.
pub fn packed_index(d: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * d - a * a.saturating_sub(1) / 2 + (b - a)
}

/// Coefficients on upper-triangle entries: `value = Σ coef·M[a, b]`.
pub fn expand_constraint(c: &Constraint, sys: &ConstraintSystem) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for &(coef, l, r) in &c.terms {
        for &(a, ca) in &sys.pool.forms[l] {
            for &(b, cb) in &sys.pool.forms[r] {
                *out.entry((a.min(b), a.max(b))).or_insert(0.0) += coef * ca * cb;
            }
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

/// Entries of `E[X̂²]_ab = Σ_k M[x_ak, x_kb]` for `a ≤ b`, as upper-triangle
/// coefficient lists.
pub fn lmi_entries(sys: &ConstraintSystem) -> Vec<((usize, usize), BTreeMap<(usize, usize), f64>)> {
    let n = sys.basis.n;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        for b in a..n {
            let mut m = BTreeMap::new();
            for k in 0..n {
                let (p, q) = (sys.basis.xhat(a, k), sys.basis.xhat(k, b));
                *m.entry((p.min(q), p.max(q))).or_insert(0.0) += 1.0;
            }
            out.push(((a, b), m));
        }
    }
    out
}

/// `E[X̂²]` from a dense moment matrix.
pub fn lmi_block(sys: &ConstraintSystem, m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = sys.basis.n;
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let s: f64 = (0..n).map(|k| m[(sys.basis.xhat(a, k), sys.basis.xhat(k, b))]).sum();
            out[(a, b)] = s;
            out[(b, a)] = s;
        }
    }
    out
}

/// `(A^*y + L^*Y) u`, the adjoint of the constraint map applied to `u`.
pub fn adjoint_matvec(sys: &ConstraintSystem, y: &[f64], y_lmi: Option<&DMatrix<f64>>, u: &[f64]) -> Vec<f64> {
    let proj = sys.pool.project(u);
    let mut q = vec![0.0; sys.pool.len()];
    for (c, &yk) in sys.constraints.iter().zip(y) {
        if yk == 0.0 {
            continue;
        }
        for &(coef, l, r) in &c.terms {
            q[l] += 0.5 * yk * coef * proj[r];
            q[r] += 0.5 * yk * coef * proj[l];
        }
    }
    let mut out = vec![0.0; u.len()];
    for (f, &qf) in sys.pool.forms.iter().zip(&q) {
        if qf != 0.0 {
            for &(k, c) in f {
                out[k] += c * qf;
            }
        }
    }
    if let Some(ym) = y_lmi {
        let n = sys.basis.n;
        let x = |i, j| sys.basis.xhat(i, j);
        for a in 0..n {
            for b in 0..n {
                let w = 0.5 * ym[(a, b)];
                if w == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[x(a, k)] += w * u[x(k, b)];
                    out[x(k, b)] += w * u[x(a, k)];
                }
            }
        }
    }
    out
}

/// Largest eigenvalue of a symmetric operator, by Lanczos with full
/// reorthogonalisation. Exact (up to rounding) once `steps ≥ dim`.
pub fn lanczos_max(dim: usize, steps: usize, seed_vec: &[f64], mut op: impl FnMut(&[f64]) -> Vec<f64>) -> f64 {
    let steps = steps.min(dim).max(1);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut q: Vec<f64> = seed_vec.to_vec();
    let nq = norm(&q);
    q.iter_mut().for_each(|a| *a /= nq);
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for _ in 0..steps {
        let mut w = op(&q);
        let a: f64 = w.iter().zip(&q).map(|(x, y)| x * y).sum();
        basis.push(q.clone());
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let nb = norm(&w);
        if nb < 1e-12 || basis.len() == steps {
            break;
        }
        beta.push(nb);
        q = w.into_iter().map(|x| x / nb).collect();
    }
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    symmetric_eigen(&t).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// A dual vector `y` (and LMI multiplier) proving that no PSD moment matrix
/// satisfies the system: `A^*y ⪯ 0` while `inf_{z∈C} ⟨y, z⟩ > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub y: Vec<f64>,
    pub y_lmi: Option<SymmetricMatrix>,
    /// `λ_max(A^*y)`, at most the tolerance.
    pub lambda_max: f64,
    /// `inf_{z∈C} ⟨y, z⟩`, strictly positive.
    pub gap: f64,
}

const CERT_EIG_TOL: f64 = 1e-8;
const CERT_GAP_TOL: f64 = 1e-6;

/// Check a candidate certificate after normalising it to unit length.
/// Returns `None` unless both Farkas conditions hold.
pub fn verify_certificate(sys: &ConstraintSystem, y: &[f64], y_lmi: Option<&DMatrix<f64>>) -> Option<Certificate> {
    let scale = (y.iter().map(|a| a * a).sum::<f64>() + y_lmi.map_or(0.0, |m| m.norm_squared())).sqrt();
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let y: Vec<f64> = y.iter().map(|a| a / scale).collect();
    let y_lmi = y_lmi.map(|m| m / scale);
    let tiny = 1e-12;
    let mut gap = 0.0;
    for (c, &yk) in sys.constraints.iter().zip(&y) {
        if yk.abs() <= tiny {
            continue;
        }
        let bound = if yk > 0.0 { c.lower } else { c.upper };
        gap += yk * bound?;
    }
    if let (Some(ym), Some(lmi)) = (&y_lmi, sys.lmi) {
        let eig = symmetric_eigen(&ym).eigenvalues;
        if eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > CERT_EIG_TOL {
            return None;
        }
        gap += lmi.bound * ym.trace();
    }
    if gap <= CERT_GAP_TOL {
        return None;
    }
    let dim = sys.dim();
    let lambda_max = if dim <= 600 {
        let mut dense = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            dense.set_column(k, &nalgebra::DVector::from_vec(adjoint_matvec(sys, &y, y_lmi.as_ref(), &e)));
        }
        symmetric_eigen(&dense).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        let start: Vec<f64> = (0..dim).map(|k| 1.0 + ((k * 7919) % 97) as f64 / 97.0).collect();
        lanczos_max(dim, 120, &start, |u| adjoint_matvec(sys, &y, y_lmi.as_ref(), u))
    };
    if lambda_max > CERT_EIG_TOL {
        return None;
    }
    Some(Certificate {
        y,
        y_lmi: y_lmi.as_ref().map(|m| SymmetricMatrix::from_dense(m).expect("square")),
        lambda_max,
        gap,
    })
}

/// Try `y` and `−y`.
pub fn find_certificate(sys: &ConstraintSystem, y: &[f64], y_lmi: Option<&DMatrix<f64>>) -> Option<Certificate> {
    verify_certificate(sys, y, y_lmi).or_else(|| {
        let neg: Vec<f64> = y.iter().map(|a| -a).collect();
        let neg_lmi = y_lmi.map(|m| -m);
        verify_certificate(sys, &neg, neg_lmi.as_ref())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_matches_symmetric_matrix() {
        let m = SymmetricMatrix::zeros(7);
        for a in 0..7 {
            for b in 0..7 {
                assert_eq!(packed_index(7, a, b), m.index(a, b));
            }
        }
    }

    #[test]
    fn lanczos_finds_top_eigenvalue() {
        let d = 30;
        let a = DMatrix::from_fn(d, d, |i, j| ((i * j + 3) % 7) as f64 - 3.0 + if i == j { 0.5 * i as f64 } else { 0.0 });
        let a = (&a + a.transpose()) * 0.5;
        let exact = symmetric_eigen(&a).eigenvalues.max();
        let start = vec![1.0; d];
        let got = lanczos_max(d, d, &start, |u| (&a * nalgebra::DVector::from_column_slice(u)).as_slice().to_vec());
        assert!((got - exact).abs() < 1e-8 * exact.abs().max(1.0));
    }
}
