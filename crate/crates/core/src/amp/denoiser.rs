//! Entrywise denoisers `f^s(x^s, …, x^0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One monomial `coef · Π_v x_v^{exps[v]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exps: Vec<u32>,
    pub coef: f64,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

/// Sparse multivariate polynomial. Variable `v` is the `v`-th argument;
/// trailing zero exponents may be omitted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MultiPoly {
    pub terms: Vec<Monomial>,
}

impl MultiPoly {
    /// `Σ_k coeffs[k] · x_var^k`.
    pub fn univariate(coeffs: &[f64], var: usize) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, &coef)| {
                let mut exps = vec![0; var + 1];
                exps[var] = k as u32;
                Monomial { exps, coef }
            })
            .collect();
        Self { terms }.normalized()
    }

    /// Merge equal monomials, drop zeros and trailing zero exponents.
    pub fn normalized(mut self) -> Self {
        for m in &mut self.terms {
            while m.exps.last() == Some(&0) {
                m.exps.pop();
            }
        }
        self.terms.sort_by(|a, b| a.exps.cmp(&b.exps));
        let mut out: Vec<Monomial> = Vec::with_capacity(self.terms.len());
        for m in self.terms {
            match out.last_mut() {
                Some(last) if last.exps == m.exps => last.coef += m.coef,
                _ => out.push(m),
            }
        }
        out.retain(|m| m.coef != 0.0);
        Self { terms: out }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Number of variables actually referenced.
    pub fn arity(&self) -> usize {
        self.terms.iter().map(|m| m.exps.len()).max().unwrap_or(0)
    }

    pub fn eval(&self, args: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coef * m.exps.iter().zip(args).map(|(&e, &x)| x.powi(e as i32)).product::<f64>())
            .sum()
    }

    /// Evaluate coordinatewise on vector arguments.
    pub fn eval_vec(&self, args: &[&[f64]]) -> Vec<f64> {
        let len = args.first().map_or(0, |a| a.len());
        let mut point = vec![0.0; args.len()];
        (0..len)
            .map(|i| {
                for (p, a) in point.iter_mut().zip(args) {
                    *p = a[i];
                }
                self.eval(&point)
            })
            .collect()
    }

    pub fn partial(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter_map(|m| {
                let e = *m.exps.get(var)?;
                if e == 0 {
                    return None;
                }
                let mut exps = m.exps.clone();
                exps[var] -= 1;
                Some(Monomial { exps, coef: m.coef * e as f64 })
            })
            .collect();
        Self { terms }.normalized()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    LastIterateOnly,
    AllIterates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserKind {
    /// `Σ_k coeffs[k] x^k` applied to the last iterate.
    Polynomial { coeffs: Vec<f64> },
    /// Polynomial in `(x^0, …, x^s)`; variable `v` is `x^v`.
    MultiPolynomial { poly: MultiPoly },
    Relu,
    /// Last-iterate arity: `tanh(βx)`. All-iterates arity: the incremental
    /// family `√δ + g(0)x^1 + Σ_{j=2}^{s} g(x^{j−1})(x^j − x^{j−1})` with
    /// `g(z) = β·sech²(βz)`, and `f^0 = √δ·x^0`.
    TanhScaled { beta: f64, delta: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Denoiser {
    #[serde(flatten)]
    pub kind: DenoiserKind,
    #[serde(default = "default_arity")]
    pub arity: Arity,
}

fn default_arity() -> Arity {
    Arity::LastIterateOnly
}

fn sech2(z: f64) -> f64 {
    let c = z.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

impl Denoiser {
    pub fn polynomial(coeffs: &[f64]) -> Self {
        Self { kind: DenoiserKind::Polynomial { coeffs: coeffs.to_vec() }, arity: Arity::LastIterateOnly }
    }

    pub fn multi_polynomial(poly: MultiPoly) -> Self {
        Self { kind: DenoiserKind::MultiPolynomial { poly }, arity: Arity::AllIterates }
    }

    pub fn relu() -> Self {
        Self { kind: DenoiserKind::Relu, arity: Arity::LastIterateOnly }
    }

    pub fn tanh_scaled(beta: f64, delta: f64, arity: Arity) -> Self {
        Self { kind: DenoiserKind::TanhScaled { beta, delta }, arity }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match (&self.kind, self.arity) {
            (DenoiserKind::Polynomial { coeffs }, Arity::LastIterateOnly) => coeffs.iter().all(|c| c.is_finite()),
            (DenoiserKind::MultiPolynomial { poly }, Arity::AllIterates) => {
                poly.terms.iter().all(|m| m.coef.is_finite())
            }
            (DenoiserKind::Relu, Arity::LastIterateOnly) => true,
            (DenoiserKind::TanhScaled { beta, delta }, _) => beta.is_finite() && *delta >= 0.0,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid denoiser {:?} with arity {:?}", self.kind, self.arity)))
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self.kind, DenoiserKind::Polynomial { .. } | DenoiserKind::MultiPolynomial { .. })
    }

    /// Symbolic form at step `s` over variables `x^0..x^s`, for polynomial kinds.
    pub fn symbolic(&self, s: usize) -> Option<MultiPoly> {
        match &self.kind {
            DenoiserKind::Polynomial { coeffs } => Some(MultiPoly::univariate(coeffs, s)),
            DenoiserKind::MultiPolynomial { poly } => Some(truncate_vars(poly, s + 1)),
            _ => None,
        }
    }

    /// `f^s(x^s, …, x^0)`; `args[v]` is `x^v`.
    pub fn apply(&self, s: usize, args: &[&[f64]]) -> Vec<f64> {
        let last = args[s];
        match &self.kind {
            DenoiserKind::Polynomial { .. } | DenoiserKind::MultiPolynomial { .. } => {
                self.symbolic(s).expect("polynomial").eval_vec(&args[..=s])
            }
            DenoiserKind::Relu => last.iter().map(|&x| x.max(0.0)).collect(),
            DenoiserKind::TanhScaled { beta, delta } => match self.arity {
                Arity::LastIterateOnly => last.iter().map(|&x| (beta * x).tanh()).collect(),
                Arity::AllIterates => incremental(*beta, *delta, s, args),
            },
        }
    }

    /// `∂f^s/∂x^j` at the given arguments.
    pub fn partial(&self, s: usize, args: &[&[f64]], j: usize) -> Vec<f64> {
        let n = args[0].len();
        match &self.kind {
            DenoiserKind::Polynomial { .. } | DenoiserKind::MultiPolynomial { .. } => {
                self.symbolic(s).expect("polynomial").partial(j).eval_vec(&args[..=s])
            }
            DenoiserKind::Relu => {
                if j == s {
                    // derivative at 0 is taken to be 0
                    args[s].iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect()
                } else {
                    vec![0.0; n]
                }
            }
            DenoiserKind::TanhScaled { beta, delta } => match self.arity {
                Arity::LastIterateOnly => {
                    if j == s {
                        args[s].iter().map(|&x| beta * sech2(beta * x)).collect()
                    } else {
                        vec![0.0; n]
                    }
                }
                Arity::AllIterates => incremental_partial(*beta, *delta, s, args, j),
            },
        }
    }
}

fn truncate_vars(poly: &MultiPoly, vars: usize) -> MultiPoly {
    // Variables beyond x^s cannot appear in f^s.
    let terms = poly
        .terms
        .iter()
        .filter(|m| m.exps.iter().skip(vars).all(|&e| e == 0))
        .cloned()
        .collect();
    MultiPoly { terms }.normalized()
}

fn incremental(beta: f64, delta: f64, s: usize, args: &[&[f64]]) -> Vec<f64> {
    let sd = delta.sqrt();
    if s == 0 {
        return args[0].iter().map(|&x| sd * x).collect();
    }
    let g = |z: f64| beta * sech2(beta * z);
    let n = args[0].len();
    let mut out: Vec<f64> = args[1].iter().map(|&x| sd + g(0.0) * x).collect();
    for j in 2..=s {
        for i in 0..n {
            out[i] += g(args[j - 1][i]) * (args[j][i] - args[j - 1][i]);
        }
    }
    out
}

fn incremental_partial(beta: f64, delta: f64, s: usize, args: &[&[f64]], j: usize) -> Vec<f64> {
    let n = args[0].len();
    if s == 0 {
        return if j == 0 { vec![delta.sqrt(); n] } else { vec![0.0; n] };
    }
    if j == 0 || j > s {
        return vec![0.0; n];
    }
    let g = |z: f64| beta * sech2(beta * z);
    let dg = |z: f64| -2.0 * beta * beta * (beta * z).tanh() * sech2(beta * z);
    (0..n)
        .map(|i| {
            let prev = if j == 1 { 0.0 } else { args[j - 1][i] };
            let mut d = g(prev);
            if j < s {
                let xj = args[j][i];
                d += dg(xj) * (args[j + 1][i] - xj) - g(xj);
            }
            d
        })
        .collect()
}

/// Denoisers `f^0..f^{t−1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiserFamily {
    pub steps: Vec<Denoiser>,
}

impl DenoiserFamily {
    pub fn new(steps: Vec<Denoiser>) -> Self {
        Self { steps }
    }

    /// The same denoiser at every one of `t` steps.
    pub fn uniform(d: Denoiser, t: usize) -> Self {
        Self { steps: vec![d; t] }
    }

    pub fn validate(&self, t: usize) -> Result<()> {
        if self.steps.len() < t {
            return Err(Error::Config(format!("family has {} denoisers, {} steps requested", self.steps.len(), t)));
        }
        self.steps.iter().try_for_each(Denoiser::validate)
    }

    pub fn step(&self, s: usize) -> Result<&Denoiser> {
        self.steps.get(s).ok_or(Error::Index { index: s, limit: self.steps.len() })
    }

    pub fn is_polynomial(&self) -> bool {
        self.steps.iter().all(Denoiser::is_polynomial)
    }

    /// Largest polynomial degree `k` over the polynomial steps.
    pub fn max_poly_degree(&self) -> u32 {
        (0..self.steps.len())
            .filter_map(|s| self.steps[s].symbolic(s).map(|p| p.degree()))
            .max()
            .unwrap_or(0)
    }
}
