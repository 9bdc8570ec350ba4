//! The AMP recursion with Onsager correction.

use serde::{Deserialize, Serialize};

use super::denoiser::DenoiserFamily;
use crate::error::{Error, Result};
use crate::matrix::{inf_norm, mean, norm2, SymmetricMatrix};

/// Iterates blowing past this infinity norm abort the run.
pub const DIVERGENCE_GUARD: f64 = 1e6;

/// `x^{-1}, x^0, …, x^t` together with every Onsager coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmpTrace {
    pub steps: usize,
    pub n: usize,
    /// `iterates[s + 1]` is `x^s`; `iterates[0]` is `x^{-1} = 0`.
    pub iterates: Vec<Vec<f64>>,
    /// `onsager[s][j − 1]` is `b_{s,j}` for `1 ≤ j ≤ s`.
    pub onsager: Vec<Vec<f64>>,
    /// Divisor applied to `x^t` to obtain `v_AMP`; 1 when not normalised.
    pub normalization: f64,
}

impl AmpTrace {
    /// `x^s` for `s ≥ 0`.
    pub fn x(&self, s: usize) -> &[f64] {
        &self.iterates[s + 1]
    }

    pub fn last(&self) -> &[f64] {
        self.x(self.steps)
    }

    /// The normalised output `x^t / normalization`.
    pub fn v_amp(&self) -> Vec<f64> {
        self.last().iter().map(|v| v / self.normalization).collect()
    }

    /// `[x^0, …, x^s]` as slices.
    pub fn prefix(&self, s: usize) -> Vec<&[f64]> {
        (0..=s).map(|k| self.x(k)).collect()
    }
}

/// `b_{t,j} = (1/n)Σ_i ∂f^t/∂x^j` evaluated at `iterates = [x^0, …, x^t]`.
pub fn onsager_coeff(iterates: &[&[f64]], fam: &DenoiserFamily, t: usize, j: usize) -> Result<f64> {
    if j > t {
        return Err(Error::Index { index: j, limit: t });
    }
    if iterates.len() <= t {
        return Err(Error::Index { index: t, limit: iterates.len() });
    }
    Ok(mean(&fam.step(t)?.partial(t, &iterates[..=t], j)))
}

/// Run `t` AMP steps from `x^0 = 1⃗`. With `normalize = Some(c)` the stored
/// normalisation is `c`, the estimate of `((1/n)E‖x^t‖²)^{1/2}`.
pub fn amp_run(x: &SymmetricMatrix, fam: &DenoiserFamily, t: usize, normalize: Option<f64>) -> Result<AmpTrace> {
    if t == 0 {
        return Err(Error::Config("amp_run needs t ≥ 1".into()));
    }
    fam.validate(t)?;
    let n = x.n();
    let mut iterates = vec![vec![0.0; n], vec![1.0; n]];
    let mut fvals: Vec<Vec<f64>> = Vec::with_capacity(t);
    let mut onsager = Vec::with_capacity(t);
    for s in 0..t {
        let args: Vec<&[f64]> = iterates[1..].iter().map(|v| v.as_slice()).collect();
        let denoiser = fam.step(s)?;
        let f = denoiser.apply(s, &args);
        let mut next = x.matvec(&f);
        let mut bs = Vec::with_capacity(s);
        for j in 1..=s {
            let b = mean(&denoiser.partial(s, &args, j));
            for (xi, fi) in next.iter_mut().zip(&fvals[j - 1]) {
                *xi -= b * fi;
            }
            bs.push(b);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: s + 1, reason: "non-finite iterate".into() });
        }
        let big = inf_norm(&next);
        if big > DIVERGENCE_GUARD {
            return Err(Error::Divergence { step: s + 1, reason: format!("‖x‖∞ = {big:.3e}") });
        }
        fvals.push(f);
        onsager.push(bs);
        iterates.push(next);
    }
    let normalization = match normalize {
        Some(c) if c > 0.0 && c.is_finite() => c,
        Some(c) => return Err(Error::Domain(format!("normalisation constant {c} must be positive"))),
        None => 1.0,
    };
    Ok(AmpTrace { steps: t, n, iterates, onsager, normalization })
}

/// Largest relative residual `‖x^{s+1} − (X f^s − Σ b f^{j−1})‖ / ‖x^{s+1}‖`
/// recomputed from the stored trace.
pub fn recursion_residual(x: &SymmetricMatrix, fam: &DenoiserFamily, trace: &AmpTrace) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in 0..trace.steps {
        let args = trace.prefix(s);
        let d = fam.step(s)?;
        let mut expect = x.matvec(&d.apply(s, &args));
        for j in 1..=s {
            let b = trace.onsager[s][j - 1];
            let prev = fam.step(j - 1)?.apply(j - 1, &trace.prefix(j - 1));
            for (e, p) in expect.iter_mut().zip(&prev) {
                *e -= b * p;
            }
        }
        let got = trace.x(s + 1);
        let diff: Vec<f64> = got.iter().zip(&expect).map(|(a, b)| a - b).collect();
        let scale = norm2(got).max(f64::MIN_POSITIVE);
        worst = worst.max(norm2(&diff) / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amp::denoiser::Denoiser;
    use crate::ensembles::{sample_symmetric, EnsembleSpec};

    fn instance(n: usize, seed: u64) -> SymmetricMatrix {
        sample_symmetric(&EnsembleSpec::gaussian(n), seed).unwrap()
    }

    #[test]
    fn first_step_is_row_sums() {
        let x = instance(30, 1);
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 1.0]), 1);
        let tr = amp_run(&x, &fam, 1, None).unwrap();
        assert_eq!(tr.x(1), x.row_sums().as_slice());
        assert!(tr.onsager[0].is_empty());
    }

    #[test]
    fn square_denoiser_second_step() {
        let x = instance(25, 2);
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 0.0, 1.0]), 2);
        let tr = amp_run(&x, &fam, 2, None).unwrap();
        let r = x.row_sums();
        let sq: Vec<f64> = r.iter().map(|v| v * v).collect();
        let k = mean(&r);
        let expect: Vec<f64> = x.matvec(&sq).iter().map(|v| v - 2.0 * k).collect();
        for (a, b) in tr.x(2).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((tr.onsager[1][0] - 2.0 * k).abs() < 1e-14);
    }

    #[test]
    fn relu_onsager_counts_positive_entries() {
        let x = instance(40, 3);
        let fam = DenoiserFamily::uniform(Denoiser::relu(), 3);
        let tr = amp_run(&x, &fam, 3, None).unwrap();
        for s in 1..3 {
            let pos = tr.x(s).iter().filter(|&&v| v > 0.0).count() as f64 / 40.0;
            assert_eq!(tr.onsager[s][s - 1], pos);
            assert!(tr.onsager[s][..s - 1].iter().all(|&b| b == 0.0));
        }
        assert!(recursion_residual(&x, &fam, &tr).unwrap() <= 1e-10);
    }

    #[test]
    fn onsager_coeff_rejects_bad_index() {
        let one = vec![1.0; 3];
        let fam = DenoiserFamily::uniform(Denoiser::relu(), 2);
        assert!(matches!(onsager_coeff(&[&one], &fam, 0, 1), Err(Error::Index { .. })));
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let x = SymmetricMatrix::from_fn(4, |_, _| 10.0);
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 0.0, 0.0, 1.0]), 6);
        match amp_run(&x, &fam, 6, None) {
            Err(Error::Divergence { step, .. }) => assert!(step >= 2),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
