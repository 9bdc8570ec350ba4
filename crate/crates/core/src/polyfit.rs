//! Least-squares polynomial surrogates for Lipschitz denoisers under the
//! Gaussian measures of state evolution.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::amp::{amp_run, Arity, Denoiser, DenoiserFamily, Monomial, MultiPoly, StateEvolutionTable};
use crate::ensembles::{sample_symmetric, EnsembleSpec};
use crate::error::{Error, Result};
use crate::matrix::norm2;
use crate::rng::{derive_seed, stream, Purpose};

/// Relative diagonal of the QR factor below which the basis is treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-10;

/// A fitted polynomial `p(x^0, …, x^s)` with `x^0 = 1` and
/// `(x^1, …, x^s) ∼ N(0, covariance)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyApprox {
    pub degree: u32,
    pub poly: MultiPoly,
    pub covariance: Vec<Vec<f64>>,
    /// Held-out estimate of `E[(f − p)²]`.
    pub l2_error: f64,
    pub l2_error_se: f64,
    /// Mean squared residual on the fitting sample.
    pub fit_error: f64,
    pub mc_samples: usize,
    pub warning: Option<String>,
}

impl PolyApprox {
    /// The fit as a denoiser for step `s`.
    pub fn denoiser(&self, s: usize) -> Denoiser {
        let univariate = self.poly.terms.iter().all(|m| m.exps.len() <= s + 1 && m.exps[..m.exps.len().min(s)].iter().all(|&e| e == 0));
        if univariate {
            let mut coeffs = vec![0.0; self.degree as usize + 1];
            for m in &self.poly.terms {
                let e = m.exps.get(s).copied().unwrap_or(0) as usize;
                coeffs[e] += m.coef;
            }
            Denoiser::polynomial(&coeffs)
        } else {
            Denoiser::multi_polynomial(self.poly.clone())
        }
    }
}

/// Exponent tuples of total degree ≤ `degree` over `vars` variables, in
/// graded order.
fn exponents(vars: usize, degree: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0; vars]];
    for d in 1..=degree {
        let mut level = Vec::new();
        let mut cur = vec![0u32; vars];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if pos + 1 == cur.len() {
                cur[pos] = left;
                out.push(cur.clone());
                return;
            }
            for e in (0..=left).rev() {
                cur[pos] = e;
                rec(pos + 1, left - e, cur, out);
            }
        }
        if vars > 0 {
            rec(0, d, &mut cur, &mut level);
        }
        out.extend(level);
    }
    out
}

/// Lower-triangular `L` with `LL^⊤ = cov`, tolerating singular PSD input.
fn gaussian_factor(cov: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let k = cov.len();
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let m = DMatrix::from_fn(k, k, |i, j| cov[i][j]);
    if (0..k).any(|i| cov[i].len() != k) {
        return Err(Error::Dimension { expected: k, got: cov.iter().map(Vec::len).max().unwrap_or(0) });
    }
    let scale = (0..k).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let eig = crate::matrix::symmetric_eigen(&m);
    if eig.eigenvalues.min() < -1e-9 * scale {
        return Err(Error::Domain("covariance is not PSD".into()));
    }
    let mut l = DMatrix::zeros(k, k);
    for j in 0..k {
        let s = m[(j, j)] - (0..j).map(|c| l[(j, c)] * l[(j, c)]).sum::<f64>();
        let d = if s > 1e-14 * scale { s.sqrt() } else { 0.0 };
        l[(j, j)] = d;
        for i in j + 1..k {
            let s = m[(i, j)] - (0..j).map(|c| l[(i, c)] * l[(j, c)]).sum::<f64>();
            l[(i, j)] = if d > 0.0 { s / d } else { 0.0 };
        }
    }
    Ok(l)
}

/// `samples[v]` for `v = 0..=k`, with `samples[0] = 1`.
fn draw(l: &DMatrix<f64>, m: usize, seed: u64, purpose: Purpose) -> Vec<Vec<f64>> {
    let k = l.nrows();
    let mut rng = stream(seed, purpose, 0);
    let mut out = vec![vec![1.0; m]];
    out.extend((0..k).map(|_| vec![0.0; m]));
    let mut z = vec![0.0; k];
    for i in 0..m {
        for zj in z.iter_mut() {
            *zj = rng.sample(StandardNormal);
        }
        for a in 0..k {
            out[a + 1][i] = (0..=a).map(|c| l[(a, c)] * z[c]).sum();
        }
    }
    out
}

struct Design {
    /// `(argument index, exponent)` pairs of each basis monomial.
    monomials: Vec<Vec<(usize, u32)>>,
    scales: Vec<f64>,
}

impl Design {
    fn new(active: &[usize], degree: u32, sds: &[f64]) -> Self {
        let monomials = exponents(active.len(), degree)
            .into_iter()
            .map(|e| active.iter().zip(e).filter(|(_, e)| *e > 0).map(|(&v, e)| (v, e)).collect())
            .collect();
        Self { monomials, scales: sds.to_vec() }
    }

    fn matrix(&self, samples: &[Vec<f64>]) -> DMatrix<f64> {
        let m = samples[0].len();
        DMatrix::from_fn(m, self.monomials.len(), |i, c| {
            self.monomials[c].iter().map(|&(v, e)| (samples[v][i] / self.scales[v]).powi(e as i32)).product()
        })
    }

    fn to_poly(&self, coef: &DVector<f64>) -> MultiPoly {
        let terms = self
            .monomials
            .iter()
            .zip(coef.iter())
            .map(|(mono, &c)| {
                let len = mono.iter().map(|&(v, _)| v + 1).max().unwrap_or(0);
                let mut exps = vec![0; len];
                let mut scale = 1.0;
                for &(v, e) in mono {
                    exps[v] = e;
                    scale *= self.scales[v].powi(e as i32);
                }
                Monomial { exps, coef: c / scale }
            })
            .collect();
        MultiPoly { terms }.normalized()
    }
}

/// Least squares in a QR-orthogonalised basis. `None` when the basis is
/// numerically rank deficient.
fn least_squares(a: DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let p = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let top = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|&d| d <= RANK_TOL * top) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
}

/// Fit `f^s` by a polynomial of total degree ≤ `degree` over
/// `(x^1, …, x^s) ∼ N(0, cov)`, with `x^0 = 1`. Denoisers reading only
/// the last iterate are fitted in that variable alone.
pub fn fit_denoiser_polynomial(
    f: &Denoiser,
    s: usize,
    degree: u32,
    cov: &[Vec<f64>],
    mc_samples: usize,
    seed: u64,
) -> Result<PolyApprox> {
    if cov.len() != s {
        return Err(Error::Dimension { expected: s, got: cov.len() });
    }
    if mc_samples < 2 {
        return Err(Error::Config("polynomial fit needs at least 2 samples".into()));
    }
    f.validate()?;
    let l = gaussian_factor(cov)?;
    let fit = draw(&l, mc_samples, seed, Purpose::PolyFit);
    let hold = draw(&l, mc_samples, seed, Purpose::PolyHoldout);
    let eval = |samples: &[Vec<f64>]| {
        let args: Vec<&[f64]> = samples.iter().map(|v| v.as_slice()).collect();
        f.apply(s, &args)
    };
    let (yf, yh) = (eval(&fit), eval(&hold));
    let active: Vec<usize> = match f.arity {
        _ if s == 0 => Vec::new(),
        Arity::LastIterateOnly => vec![s],
        Arity::AllIterates => (1..=s).collect(),
    };
    let mut sds = vec![1.0; s + 1];
    for v in 1..=s {
        let sd = cov[v - 1][v - 1].sqrt();
        sds[v] = if sd > 0.0 { sd } else { 1.0 };
    }
    let y = DVector::from_vec(yf.clone());
    let mut warning = None;
    let mut deg = degree;
    let (design, coef) = loop {
        let design = Design::new(&active, deg, &sds);
        if let Some(c) = least_squares(design.matrix(&fit), &y) {
            break (design, c);
        }
        if deg == 0 {
            return Err(Error::Numerical("least squares failed at degree 0".into()));
        }
        deg -= 1;
        let msg = format!("ill-conditioned basis; degree reduced to {deg}");
        warn!("{msg}");
        warning = Some(msg);
    };
    let poly = design.to_poly(&coef);
    let residuals = |samples: &[Vec<f64>], target: &[f64]| -> Vec<f64> {
        let args: Vec<&[f64]> = samples.iter().map(|v| v.as_slice()).collect();
        poly.eval_vec(&args).iter().zip(target).map(|(p, t)| (t - p).powi(2)).collect()
    };
    let rf = residuals(&fit, &yf);
    let rh = residuals(&hold, &yh);
    let m = mc_samples as f64;
    let mean = rh.iter().sum::<f64>() / m;
    let var = rh.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0);
    if cov.iter().flatten().any(|v| v.abs() > 2.0) || (0..s).any(|i| cov[i][i] < 1.0) {
        log::debug!("covariance outside the regime Q ⪰ I, |Q_ij| ≤ 2; fitting anyway");
    }
    Ok(PolyApprox {
        degree: deg,
        poly,
        covariance: cov.to_vec(),
        l2_error: mean,
        l2_error_se: (var / m).sqrt(),
        fit_error: rf.iter().sum::<f64>() / m,
        mc_samples,
        warning,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyFitOptions {
    pub degree_cap: u32,
    pub mc_samples: usize,
    pub seed: u64,
    /// Dimension and number of the fresh instances used for the end-to-end check.
    pub instance_n: usize,
    pub instances: usize,
    /// Target discrepancy; when set, the degree is chosen by doubling search.
    pub delta: Option<f64>,
}

impl Default for PolyFitOptions {
    fn default() -> Self {
        Self { degree_cap: 9, mc_samples: 20_000, seed: 0, instance_n: 1000, instances: 3, delta: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyFamilyReport {
    pub degree: u32,
    pub per_step: Vec<PolyApprox>,
    /// `(1/√n)‖x^t − x̂^t‖` on each fresh instance.
    pub discrepancies: Vec<f64>,
    pub mean_discrepancy: f64,
    /// `(degree, mean discrepancy)` for every degree tried.
    pub curve: Vec<(u32, f64)>,
}

/// Per-step fits at one degree, plus the end-to-end discrepancy.
fn fit_family(fam: &DenoiserFamily, t: usize, degree: u32, se: &StateEvolutionTable, opts: &PolyFitOptions) -> Result<(DenoiserFamily, PolyFamilyReport)> {
    let mut steps = Vec::with_capacity(t);
    let mut per_step = Vec::with_capacity(t);
    for s in 0..t {
        let f = fam.step(s)?;
        if f.is_polynomial() {
            steps.push(f.clone());
            continue;
        }
        let fit = fit_denoiser_polynomial(f, s, degree, &se.covariance(s), opts.mc_samples, derive_seed(opts.seed, Purpose::PolyFit, s as u64))?;
        steps.push(fit.denoiser(s));
        per_step.push(fit);
    }
    let poly_fam = DenoiserFamily::new(steps);
    let mut discrepancies = Vec::with_capacity(opts.instances);
    for k in 0..opts.instances {
        let x = sample_symmetric(&EnsembleSpec::gaussian(opts.instance_n), derive_seed(opts.seed, Purpose::Experiment, k as u64))?;
        let a = amp_run(&x, fam, t, None)?;
        let b = amp_run(&x, &poly_fam, t, None)?;
        let diff: Vec<f64> = a.last().iter().zip(b.last()).map(|(p, q)| p - q).collect();
        discrepancies.push(norm2(&diff) / (opts.instance_n as f64).sqrt());
    }
    let mean_discrepancy = discrepancies.iter().sum::<f64>() / discrepancies.len().max(1) as f64;
    Ok((poly_fam, PolyFamilyReport { degree, per_step, discrepancies, mean_discrepancy, curve: vec![(degree, mean_discrepancy)] }))
}

/// Replace each non-polynomial denoiser by its fit under the step's
/// state-evolution covariance. With `opts.delta` the degree is searched over
/// `1, 2, 4, …, degree_cap`; otherwise `degree_cap` is used directly.
pub fn approximate_amp_with_polynomials(
    fam: &DenoiserFamily,
    t: usize,
    se: &StateEvolutionTable,
    opts: &PolyFitOptions,
) -> Result<(DenoiserFamily, PolyFamilyReport)> {
    fam.validate(t)?;
    if se.t < t.saturating_sub(1) {
        return Err(Error::Config(format!("state evolution covers {} steps, {} needed", se.t, t - 1)));
    }
    if opts.instances == 0 || opts.instance_n == 0 {
        return Err(Error::Config("at least one fresh instance of positive size is needed".into()));
    }
    if fam.steps[..t].iter().all(Denoiser::is_polynomial) {
        let family = DenoiserFamily::new(fam.steps[..t].to_vec());
        let report = PolyFamilyReport {
            degree: fam.max_poly_degree(),
            per_step: Vec::new(),
            discrepancies: vec![0.0; opts.instances],
            mean_discrepancy: 0.0,
            curve: Vec::new(),
        };
        return Ok((family, report));
    }
    let Some(delta) = opts.delta else {
        return fit_family(fam, t, opts.degree_cap, se, opts);
    };
    let mut curve = Vec::new();
    let mut degree = 1u32;
    loop {
        let d = degree.min(opts.degree_cap);
        let (family, mut report) = fit_family(fam, t, d, se, opts)?;
        curve.push((d, report.mean_discrepancy));
        if report.mean_discrepancy <= delta {
            report.curve = curve;
            return Ok((family, report));
        }
        if d == opts.degree_cap {
            let best = curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            return Err(Error::DegreeInsufficient { cap: opts.degree_cap, delta, best, curve });
        }
        degree *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_counts() {
        assert_eq!(exponents(1, 3).len(), 4);
        assert_eq!(exponents(2, 2).len(), 6);
        assert_eq!(exponents(0, 3).len(), 1);
    }

    #[test]
    fn polynomial_recovers_itself() {
        let f = Denoiser::polynomial(&[0.5, -1.0, 0.25]);
        let fit = fit_denoiser_polynomial(&f, 1, 4, &[vec![0.7]], 2000, 3).unwrap();
        assert!(fit.l2_error < 1e-8);
        let coeffs = match fit.denoiser(1).kind {
            crate::amp::DenoiserKind::Polynomial { coeffs } => coeffs,
            other => panic!("{other:?}"),
        };
        for (a, b) in coeffs.iter().zip([0.5, -1.0, 0.25, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-8, "{coeffs:?}");
        }
    }

    #[test]
    fn relu_error_non_increasing() {
        let f = Denoiser::relu();
        let errs: Vec<f64> =
            [1, 3, 5, 7].iter().map(|&d| fit_denoiser_polynomial(&f, 1, d, &[vec![1.0]], 5000, 11).unwrap().fit_error).collect();
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{errs:?}");
        }
    }

    #[test]
    fn step_zero_is_constant() {
        let fit = fit_denoiser_polynomial(&Denoiser::relu(), 0, 3, &[], 10, 1).unwrap();
        assert_eq!(fit.poly.terms.len(), 1);
        assert!((fit.poly.terms[0].coef - 1.0).abs() < 1e-12);
    }
}
