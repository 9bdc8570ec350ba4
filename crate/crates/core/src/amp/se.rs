//! Monte Carlo state evolution.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::denoiser::DenoiserFamily;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// `q[a][b]` is `Q_{a+1,b+1} = E[f^a(U^a…U^0) f^b(U^b…U^0)]`, the covariance
/// of `(U^{a+1}, U^{b+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateEvolutionTable {
    pub t: usize,
    pub q: Vec<Vec<f64>>,
    /// Monte Carlo standard error of each `q` entry.
    pub q_se: Vec<Vec<f64>>,
    pub mc_samples: usize,
}

impl StateEvolutionTable {
    /// Variance of `U^s`, `s ≥ 1`.
    pub fn variance(&self, s: usize) -> f64 {
        self.q[s - 1][s - 1]
    }

    /// Covariance of `(U^1, …, U^s)`.
    pub fn covariance(&self, s: usize) -> Vec<Vec<f64>> {
        (0..s).map(|a| self.q[a][..s].to_vec()).collect()
    }
}

const PSD_TOL: f64 = 1e-9;

/// Estimate `Q` by sampling the limiting Gaussian process one step at a time.
pub fn state_evolution(fam: &DenoiserFamily, t: usize, mc_samples: usize, seed: u64) -> Result<StateEvolutionTable> {
    if t == 0 {
        return Ok(StateEvolutionTable { t: 0, q: Vec::new(), q_se: Vec::new(), mc_samples });
    }
    fam.validate(t)?;
    if mc_samples < 2 {
        return Err(Error::Config("state evolution needs at least 2 samples".into()));
    }
    let m = mc_samples;
    // us[s] holds samples of U^s; U^0 = 1.
    let mut us: Vec<Vec<f64>> = vec![vec![1.0; m]];
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(t);
    let mut fv: Vec<Vec<f64>> = Vec::with_capacity(t);
    let mut l = vec![vec![0.0; t]; t];
    let mut q = vec![vec![0.0; t]; t];
    let mut q_se = vec![vec![0.0; t]; t];
    for s in 0..t {
        let args: Vec<&[f64]> = us.iter().map(|v| v.as_slice()).collect();
        fv.push(fam.step(s)?.apply(s, &args));
        for k in 0..=s {
            let prods: Vec<f64> = fv[s].iter().zip(&fv[k]).map(|(a, b)| a * b).collect();
            let mu = prods.iter().sum::<f64>() / m as f64;
            let var = prods.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / (m - 1) as f64;
            q[s][k] = mu;
            q[k][s] = mu;
            q_se[s][k] = (var / m as f64).sqrt();
            q_se[k][s] = q_se[s][k];
        }
        // extend the Cholesky factor by one row
        for k in 0..s {
            let dotp: f64 = (0..k).map(|c| l[s][c] * l[k][c]).sum();
            l[s][k] = if l[k][k] > 1e-12 { (q[s][k] - dotp) / l[k][k] } else { 0.0 };
        }
        let rest = q[s][s] - (0..s).map(|c| l[s][c] * l[s][c]).sum::<f64>();
        if rest < -PSD_TOL * q[s][s].abs().max(1.0) {
            return Err(Error::Numerical(format!("state-evolution covariance not PSD at step {}", s + 1)));
        }
        l[s][s] = rest.max(0.0).sqrt();
        let mut rng = stream(seed, Purpose::StateEvolution, s as u64);
        z.push((0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
        let next: Vec<f64> = (0..m).map(|i| (0..=s).map(|c| l[s][c] * z[c][i]).sum()).collect();
        us.push(next);
    }
    Ok(StateEvolutionTable { t, q, q_se, mc_samples })
}

/// Test functions with closed-form Gaussian expectations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    Identity,
    Square,
    Relu,
}

impl TestFunction {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            TestFunction::Identity => u,
            TestFunction::Square => u * u,
            TestFunction::Relu => u.max(0.0),
        }
    }

    /// `E[ψ(U)]` for `U ∼ N(0, var)`.
    pub fn gaussian_mean(self, var: f64) -> f64 {
        match self {
            TestFunction::Identity => 0.0,
            TestFunction::Square => var,
            TestFunction::Relu => (var / (2.0 * std::f64::consts::PI)).sqrt(),
        }
    }

    /// `∂E[ψ(U)]/∂var`, used to propagate the error of an estimated variance.
    pub fn variance_sensitivity(self, var: f64) -> f64 {
        match self {
            TestFunction::Identity => 0.0,
            TestFunction::Square => 1.0,
            TestFunction::Relu => {
                if var > 0.0 {
                    0.5 / (2.0 * std::f64::consts::PI * var).sqrt()
                } else {
                    0.0
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amp::denoiser::Denoiser;

    #[test]
    fn t_zero_is_empty() {
        let fam = DenoiserFamily::uniform(Denoiser::relu(), 1);
        let tab = state_evolution(&fam, 0, 10, 1).unwrap();
        assert!(tab.q.is_empty());
    }

    #[test]
    fn identity_first_entry_is_one() {
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 1.0]), 3);
        let tab = state_evolution(&fam, 3, 20_000, 7).unwrap();
        assert_eq!(tab.q[0][0], 1.0);
        // U^1 ∼ N(0,1), so Q_22 = E[(U^1)²] = 1
        assert!((tab.q[1][1] - 1.0).abs() < 4.0 * tab.q_se[1][1]);
        assert!(tab.q[0][1].abs() < 4.0 * tab.q_se[0][1]);
    }

    #[test]
    fn relu_second_variance_is_half() {
        let fam = DenoiserFamily::uniform(Denoiser::relu(), 2);
        let tab = state_evolution(&fam, 2, 50_000, 3).unwrap();
        assert!((tab.q[1][1] - 0.5).abs() < 4.0 * tab.q_se[1][1]);
    }

    #[test]
    fn relu_gaussian_mean() {
        assert!((TestFunction::Relu.gaussian_mean(1.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }
}
