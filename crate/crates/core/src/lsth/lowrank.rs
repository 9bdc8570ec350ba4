//! Low-rank augmented Lagrangian method for large moment matrices.
//!
//! The moment matrix is factored as `M = RR^⊤` with `R` of size `D × r`,
//! which keeps it PSD by construction. Windowed constraints and the
//! operator-norm LMI enter through an augmented Lagrangian minimised by
//! L-BFGS; multipliers are updated between inner solves and the penalty
//! grows when the violation stalls.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::admm::RawOutcome;
use super::ops::find_certificate;
use super::system::ConstraintSystem;
use crate::error::Result;
use crate::matrix::{symmetric_eigen, SymmetricMatrix};
use crate::rng::{stream, Purpose};

const INNER_MAX: usize = 300;
const RHO_START: f64 = 10.0;
const RHO_MAX: f64 = 1e9;
const MEMORY: usize = 10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with Armijo backtracking. Returns the number of
/// iterations taken.
pub(crate) fn lbfgs(f: &mut dyn FnMut(&[f64], &mut [f64]) -> f64, x: &mut [f64], max_iter: usize, gtol: f64) -> usize {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(x, &mut g);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    for it in 0..max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= gtol {
            return it;
        }
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = hist.back().map_or(1.0 / gnorm.max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            hist.clear();
            dir = g.iter().map(|v| -v / gnorm.max(1.0)).collect();
            slope = dot(&dir, &g);
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                xn[i] = x[i] + step * dir[i];
            }
            let fnew = f(&xn, &mut gn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                fx = fnew;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return it;
        }
        let s: Vec<f64> = xn.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x.copy_from_slice(&xn);
        g.copy_from_slice(&gn);
    }
    max_iter
}

struct Scaled {
    scale: f64,
    lower: f64,
    upper: f64,
}

struct Lagrangian<'a> {
    sys: &'a ConstraintSystem,
    r: usize,
    scaled: Vec<Scaled>,
    lambda: Vec<f64>,
    lmi: Option<(f64, Vec<usize>, DMatrix<f64>)>,
    rho: f64,
}

impl<'a> Lagrangian<'a> {
    fn projections(&self, rf: &[f64]) -> Vec<f64> {
        let r = self.r;
        let mut p = vec![0.0; self.sys.pool.len() * r];
        for (f, form) in self.sys.pool.forms.iter().enumerate() {
            let pf = &mut p[f * r..(f + 1) * r];
            for &(k, c) in form {
                pf.iter_mut().zip(&rf[k * r..(k + 1) * r]).for_each(|(a, b)| *a += c * b);
            }
        }
        p
    }

    fn values(&self, p: &[f64]) -> Vec<f64> {
        let r = self.r;
        self.sys
            .constraints
            .iter()
            .map(|c| c.terms.iter().map(|&(coef, l, m)| coef * dot(&p[l * r..(l + 1) * r], &p[m * r..(m + 1) * r])).sum())
            .collect()
    }

    /// `H` with row `a` the concatenation of the `R`-rows of `X̂_{a,·}`.
    fn h_matrix(&self, rf: &[f64], xmap: &[usize]) -> DMatrix<f64> {
        let (n, r) = (self.sys.basis.n, self.r);
        DMatrix::from_fn(n, n * r, |a, col| {
            let (k, j) = (col / r, col % r);
            rf[xmap[a * n + k] * r + j]
        })
    }

    fn shifted_lmi(&self, hht: &DMatrix<f64>, bound: f64, mult: &DMatrix<f64>) -> DMatrix<f64> {
        let n = hht.nrows();
        let c = (hht - DMatrix::identity(n, n) * bound) / bound + mult / self.rho;
        let eig = symmetric_eigen(&c);
        let mut v = eig.eigenvectors.clone();
        for k in 0..n {
            v.column_mut(k).scale_mut(eig.eigenvalues[k].max(0.0));
        }
        v * eig.eigenvectors.transpose()
    }

    fn eval(&self, rf: &[f64], grad: &mut [f64]) -> f64 {
        let r = self.r;
        let p = self.projections(rf);
        let vals = self.values(&p);
        let mut gp = vec![0.0; p.len()];
        let mut total = 0.0;
        for ((c, s), (&g, &lam)) in self.sys.constraints.iter().zip(&self.scaled).zip(vals.iter().zip(&self.lambda)) {
            let t = s.scale * g + lam / self.rho;
            let dist = t - t.clamp(s.lower, s.upper);
            if dist == 0.0 {
                continue;
            }
            total += 0.5 * self.rho * dist * dist;
            let mu = self.rho * dist * s.scale;
            for &(coef, l, m) in &c.terms {
                for j in 0..r {
                    gp[l * r + j] += mu * coef * p[m * r + j];
                    gp[m * r + j] += mu * coef * p[l * r + j];
                }
            }
        }
        grad.iter_mut().for_each(|v| *v = 0.0);
        for (f, form) in self.sys.pool.forms.iter().enumerate() {
            let gf = &gp[f * r..(f + 1) * r];
            if gf.iter().all(|v| *v == 0.0) {
                continue;
            }
            for &(k, c) in form {
                grad[k * r..(k + 1) * r].iter_mut().zip(gf).for_each(|(a, b)| *a += c * b);
            }
        }
        if let Some((bound, xmap, mult)) = &self.lmi {
            let h = self.h_matrix(rf, xmap);
            let hht = &h * h.transpose();
            let plus = self.shifted_lmi(&hht, *bound, mult);
            total += 0.5 * self.rho * plus.norm_squared();
            let dh = (&plus * &h) * (2.0 * self.rho / bound);
            let n = self.sys.basis.n;
            for a in 0..n {
                for k in 0..n {
                    let row = xmap[a * n + k];
                    for j in 0..r {
                        grad[row * r + j] += dh[(a, k * r + j)];
                    }
                }
            }
        }
        total
    }

    /// Violations in original units and the updated multipliers.
    fn violation(&self, rf: &[f64]) -> f64 {
        let vals = self.values(&self.projections(rf));
        let mut worst = 0.0f64;
        for (c, v) in self.sys.constraints.iter().zip(vals) {
            worst = worst.max(c.violation(v));
        }
        if let Some((bound, xmap, _)) = &self.lmi {
            let h = self.h_matrix(rf, xmap);
            let top = symmetric_eigen(&(&h * h.transpose())).eigenvalues.max();
            worst = worst.max(top - bound);
        }
        worst
    }

    fn update_multipliers(&mut self, rf: &[f64]) {
        let vals = self.values(&self.projections(rf));
        for ((s, g), lam) in self.scaled.iter().zip(vals).zip(self.lambda.iter_mut()) {
            let t = s.scale * g + *lam / self.rho;
            *lam = self.rho * (t - t.clamp(s.lower, s.upper));
        }
        if let Some((bound, xmap, mult)) = &self.lmi {
            let h = self.h_matrix(rf, xmap);
            let plus = self.shifted_lmi(&(&h * h.transpose()), *bound, mult);
            let next = plus * self.rho;
            self.lmi.as_mut().expect("lmi").2 = next;
        }
    }
}

/// Default factor width: `⌈√(2m)⌉` capped at 16. Solutions found from a
/// small random start are close to rank one, and the cost of every
/// evaluation grows linearly in the width.
pub fn default_rank(n_constraints: usize) -> usize {
    ((2.0 * n_constraints as f64).sqrt().ceil() as usize).clamp(2, 16)
}

/// Scale of the random start. Small enough that the factor grows along the
/// directions the constraints favour instead of staying near its noise.
const INIT_NOISE: f64 = 1e-4;

pub(crate) fn solve_lowrank(
    sys: &ConstraintSystem,
    warm: Option<&[f64]>,
    rank: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<RawOutcome> {
    let d = sys.dim();
    let r = rank.max(1);
    let mut rng = stream(seed, Purpose::Solver, 0);
    let mut rf = vec![0.0; d * r];
    let noise = INIT_NOISE / (r as f64).sqrt();
    for k in 0..d {
        for j in 0..r {
            let z: f64 = StandardNormal.sample(&mut rng);
            rf[k * r + j] = noise * z;
        }
    }
    rf[0..r].iter_mut().for_each(|v| *v = 0.0);
    rf[0] = 1.0;
    if let Some(z) = warm {
        for k in 1..d {
            rf[k * r] += z[k];
        }
    }

    let scaled = sys
        .constraints
        .iter()
        .map(|c| {
            let norm2: f64 = c
                .terms
                .iter()
                .map(|&(coef, l, m)| {
                    let nl: f64 = sys.pool.forms[l].iter().map(|e| e.1 * e.1).sum();
                    let nm: f64 = sys.pool.forms[m].iter().map(|e| e.1 * e.1).sum();
                    coef * coef * nl * nm
                })
                .sum();
            let scale = 1.0 / norm2.sqrt().max(1e-12);
            Scaled {
                scale,
                lower: c.lower.map_or(f64::NEG_INFINITY, |v| v * scale),
                upper: c.upper.map_or(f64::INFINITY, |v| v * scale),
            }
        })
        .collect();
    let lmi = sys.lmi.map(|l| {
        let n = sys.basis.n;
        let xmap = (0..n * n).map(|ak| sys.basis.xhat(ak / n, ak % n)).collect();
        (l.bound, xmap, DMatrix::zeros(n, n))
    });
    let mut lag = Lagrangian { sys, r, scaled, lambda: vec![0.0; sys.constraints.len()], lmi, rho: RHO_START };

    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_r = rf.clone();
    let mut prev = f64::INFINITY;
    let mut total = 0;
    while total < max_iters {
        let budget = (max_iters - total).min(INNER_MAX);
        let gtol = 1e-3 * tol.sqrt() * lag.rho.sqrt();
        let used = {
            let lag_ref = &lag;
            let mut f = |x: &[f64], g: &mut [f64]| lag_ref.eval(x, g);
            lbfgs(&mut f, &mut rf, budget, gtol)
        };
        total += used.max(1);
        let v = lag.violation(&rf);
        trace.push(v);
        if v < best {
            best = v;
            best_r.clone_from(&rf);
        }
        if v <= tol {
            break;
        }
        lag.update_multipliers(&rf);
        if v > 0.25 * prev {
            lag.rho = (lag.rho * 10.0).min(RHO_MAX);
        }
        prev = v;
    }

    let certificate = if best > tol {
        let y: Vec<f64> = lag.lambda.iter().zip(&lag.scaled).map(|(l, s)| l * s.scale).collect();
        let y_lmi = lag.lmi.as_ref().map(|(bound, _, m)| m / *bound);
        find_certificate(sys, &y, y_lmi.as_ref())
    } else {
        None
    };
    let rm = DMatrix::from_row_slice(d, r, &best_r);
    let moment = SymmetricMatrix::from_dense(&(&rm * rm.transpose()))?;
    Ok(RawOutcome { moment: Some(moment), certificate, iterations: total, best_violation: best, trace })
}
