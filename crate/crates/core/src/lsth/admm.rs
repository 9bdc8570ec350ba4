//! Splitting method for small moment matrices.
//!
//! The moment matrix `x = svec(M)` and the constraint values `s` are split
//! between the graph `{s = Ax}` and the product of the PSD cone with the
//! constraint windows (and the LMI cone). Both projections are exact; the
//! graph projection uses a Cholesky factor of `I + AA^⊤`. When the two sets
//! do not meet, the dual increments converge to a separating direction that
//! is checked as a Farkas certificate.

use nalgebra::{DMatrix, DVector};

use super::ops::{expand_constraint, find_certificate, lmi_entries, packed_index, Certificate};
use super::system::ConstraintSystem;
use crate::error::{Error, Result};
use crate::matrix::{symmetric_eigen, SymmetricMatrix};

const OVER_RELAXATION: f64 = 1.6;
const CHECK_EVERY: usize = 10;
const CERTIFY_EVERY: usize = 100;
const CERTIFY_AFTER: usize = 300;

pub(crate) struct RawOutcome {
    pub moment: Option<SymmetricMatrix>,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
    pub best_violation: f64,
    pub trace: Vec<f64>,
}

struct Row {
    entries: Vec<(usize, f64)>,
    lower: f64,
    upper: f64,
    /// Original constraint index and normalisation, or `None` for LMI rows.
    source: Option<(usize, f64)>,
}

fn svec_weight(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        std::f64::consts::FRAC_1_SQRT_2
    }
}

fn smat(x: &[f64], d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = x[packed_index(d, a, b)] * svec_weight(a, b);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

fn svec_into(m: &DMatrix<f64>, x: &mut [f64]) {
    let d = m.nrows();
    for a in 0..d {
        for b in a..d {
            x[packed_index(d, a, b)] = m[(a, b)] / svec_weight(a, b);
        }
    }
}

/// `V max(Λ, 0) V^⊤`.
fn psd_part(m: DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetric_eigen(&m);
    let d = eig.eigenvalues.len();
    let mut scaled = eig.eigenvectors.clone();
    for k in 0..d {
        let l = eig.eigenvalues[k];
        scaled.column_mut(k).scale_mut(l.max(0.0));
    }
    scaled * eig.eigenvectors.transpose()
}

pub(crate) fn solve_admm(sys: &ConstraintSystem, max_iters: usize, tol: f64) -> Result<RawOutcome> {
    let d = sys.dim();
    let nv = d * (d + 1) / 2;
    let mut rows: Vec<Row> = Vec::new();
    for (k, c) in sys.constraints.iter().enumerate() {
        let entries: Vec<(usize, f64)> = expand_constraint(c, sys)
            .into_iter()
            .map(|((a, b), v)| (packed_index(d, a, b), v * svec_weight(a, b)))
            .collect();
        let sigma = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        let (lo, hi) = (c.lower.unwrap_or(f64::NEG_INFINITY), c.upper.unwrap_or(f64::INFINITY));
        if sigma == 0.0 {
            if lo > 0.0 || hi < 0.0 {
                let mut y = vec![0.0; sys.constraints.len()];
                y[k] = 1.0;
                let certificate = find_certificate(sys, &y, None);
                return Ok(RawOutcome { moment: None, certificate, iterations: 0, best_violation: lo.max(-hi), trace: vec![] });
            }
            continue;
        }
        rows.push(Row {
            entries: entries.into_iter().map(|(i, v)| (i, v / sigma)).collect(),
            lower: lo / sigma,
            upper: hi / sigma,
            source: Some((k, sigma)),
        });
    }
    let n_regular = rows.len();
    let lmi_first = rows.len();
    if sys.lmi.is_some() {
        for ((a, b), m) in lmi_entries(sys) {
            let scale = if a == b { 1.0 } else { std::f64::consts::SQRT_2 };
            rows.push(Row {
                entries: m.into_iter().map(|((p, q), v)| (packed_index(d, p, q), scale * v * svec_weight(p, q))).collect(),
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                source: None,
            });
        }
    }
    let m = rows.len();

    // I + AA^⊤ through column incidence lists
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
    for (r, row) in rows.iter().enumerate() {
        for &(i, v) in &row.entries {
            cols[i].push((r, v));
        }
    }
    let mut k = DMatrix::<f64>::identity(m, m);
    for col in &cols {
        for &(r1, v1) in col {
            for &(r2, v2) in col {
                k[(r1, r2)] += v1 * v2;
            }
        }
    }
    let chol = k.cholesky().ok_or_else(|| Error::Numerical("I + AA^T is not positive definite".into()))?;

    let apply = |x: &[f64]| -> Vec<f64> { rows.iter().map(|r| r.entries.iter().map(|&(i, v)| v * x[i]).sum()).collect() };
    let apply_t = |w: &[f64], out: &mut [f64]| {
        for (r, &wr) in rows.iter().zip(w) {
            for &(i, v) in &r.entries {
                out[i] += v * wr;
            }
        }
    };
    let n_lmi = sys.basis.n;
    let lmi_bound = sys.lmi.map(|l| l.bound);
    let project_cone = |xs: &mut [f64], ss: &mut [f64]| {
        let p = psd_part(smat(xs, d));
        svec_into(&p, xs);
        for (s, r) in ss.iter_mut().zip(&rows).take(n_regular) {
            *s = s.clamp(r.lower, r.upper);
        }
        if let Some(bound) = lmi_bound {
            let tail = &mut ss[lmi_first..];
            let sm = smat(tail, n_lmi);
            let shifted = &sm - DMatrix::identity(n_lmi, n_lmi) * bound;
            let projected = sm - psd_part(shifted);
            svec_into(&projected, tail);
        }
    };

    let original_violation = |xs: &[f64]| -> f64 {
        let vals = apply(xs);
        let mut worst = 0.0f64;
        for (r, &v) in rows.iter().zip(&vals).take(n_regular) {
            let (_, sigma) = r.source.expect("regular row");
            let dev = (r.lower - v).max(v - r.upper).max(0.0) * sigma;
            worst = worst.max(dev);
        }
        if let Some(bound) = lmi_bound {
            let l = smat(&vals[lmi_first..], n_lmi);
            worst = worst.max(symmetric_eigen(&l).eigenvalues.max() - bound);
        }
        worst
    };

    let mut x = vec![0.0; nv];
    let mut s = vec![0.0; m];
    let mut lx = vec![0.0; nv];
    let mut ls = vec![0.0; m];
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_x = x.clone();
    let mut iterations = 0;
    for it in 1..=max_iters {
        iterations = it;
        // graph projection of (x − lx, s − ls)
        let x0: Vec<f64> = x.iter().zip(&lx).map(|(a, b)| a - b).collect();
        let s0: Vec<f64> = s.iter().zip(&ls).map(|(a, b)| a - b).collect();
        let ax0 = apply(&x0);
        let rhs = DVector::from_iterator(m, s0.iter().zip(&ax0).map(|(a, b)| a - b));
        let w = chol.solve(&rhs);
        let mut xt = x0;
        apply_t(w.as_slice(), &mut xt);
        let st = apply(&xt);

        let xr: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| OVER_RELAXATION * a + (1.0 - OVER_RELAXATION) * b).collect();
        let sr: Vec<f64> = st.iter().zip(&s).map(|(a, b)| OVER_RELAXATION * a + (1.0 - OVER_RELAXATION) * b).collect();
        let mut xn: Vec<f64> = xr.iter().zip(&lx).map(|(a, b)| a + b).collect();
        let mut sn: Vec<f64> = sr.iter().zip(&ls).map(|(a, b)| a + b).collect();
        project_cone(&mut xn, &mut sn);
        let mut dls = vec![0.0; m];
        for i in 0..nv {
            lx[i] += xr[i] - xn[i];
        }
        for i in 0..m {
            let step = sr[i] - sn[i];
            ls[i] += step;
            dls[i] = step;
        }
        x = xn;
        s = sn;

        if it % CHECK_EVERY == 0 || it == max_iters {
            let v = original_violation(&x);
            trace.push(v);
            if v < best {
                best = v;
                best_x.clone_from(&x);
            }
            if v <= tol {
                break;
            }
        }
        if it >= CERTIFY_AFTER && it % CERTIFY_EVERY == 0 {
            let mut y = vec![0.0; sys.constraints.len()];
            for (r, &dy) in rows.iter().zip(&dls).take(n_regular) {
                let (k, sigma) = r.source.expect("regular row");
                y[k] = dy / sigma;
            }
            let y_lmi = lmi_bound.map(|_| smat(&dls[lmi_first..], n_lmi));
            if let Some(cert) = find_certificate(sys, &y, y_lmi.as_ref()) {
                return Ok(RawOutcome { moment: None, certificate: Some(cert), iterations, best_violation: best, trace });
            }
        }
    }
    let moment = SymmetricMatrix::from_dense(&smat(&best_x, d))?;
    Ok(RawOutcome { moment: Some(moment), certificate: None, iterations, best_violation: best, trace })
}
