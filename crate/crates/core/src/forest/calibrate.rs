//! Monte Carlo calibration of lumber statistics.

use log::warn;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use super::enumerate::{enumerate_lumber, trees_by_degree};
use super::lumber::Lumber;
use super::tree::{RootedTree, Tree, TreeEvaluator};
use crate::amp::{amp_run, DenoiserFamily, ProblemSpec};
use crate::ensembles::{sample_symmetric, EnsembleSpec};
use crate::error::{Error, Result};
use crate::matrix::{mean_dot, SymmetricMatrix};
use crate::rng::{derive_seed, Purpose};

impl Serialize for Lumber {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let trunks: Vec<Value> = self.trunks.iter().map(|t| t.to_tree().to_json()).collect();
        Value::Array(vec![self.base.to_tree().to_json(), Value::Array(trunks)]).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lumber {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = Value::deserialize(d)?;
        let parts = v.as_array().filter(|p| p.len() == 2).ok_or_else(|| D::Error::custom("lumber: [base, trunks]"))?;
        let base = Tree::from_json(&parts[0]).map_err(D::Error::custom)?.canonical();
        let trunks = parts[1]
            .as_array()
            .ok_or_else(|| D::Error::custom("lumber trunks"))?
            .iter()
            .map(|t| Tree::from_json(t).map(|t| t.canonical()))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Lumber::new(base, trunks).map_err(D::Error::custom)
    }
}

/// How wide the acceptance window of each statistic is.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlackPolicy {
    /// Every statistic uses `c_slack`; the norm uses `η/48`.
    Formula,
    /// Half-width `max(c_slack, c·sd)`, where `sd` is the sampling standard
    /// deviation of the statistic; the norm uses `max(η/48, c·sd)`.
    VarianceWindow { c: f64 },
}

impl Default for SlackPolicy {
    fn default() -> Self {
        SlackPolicy::VarianceWindow { c: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// `s(n)` in `c_slack = η/(s(n)·N_L²)`; defaults to `ln n`.
    pub s_n: Option<f64>,
    /// Infinity-cap constant; defaults to `4K²`.
    pub c_k: Option<f64>,
    pub policy: SlackPolicy,
    /// Refuse tables whose standard errors exceed a quarter of the window.
    pub enforce_standard_error: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { s_n: None, c_k: None, policy: SlackPolicy::default(), enforce_standard_error: true }
    }
}

/// Reference values of lumber statistics under the clean ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticsTable {
    pub degree: usize,
    pub n: usize,
    pub t: usize,
    pub eta: f64,
    pub lumber: Vec<Lumber>,
    /// `E[(1/n)⟨L_a(Z), L_b(Z)⟩]`.
    pub pair_stats: Vec<Vec<f64>>,
    pub pair_sd: Vec<Vec<f64>>,
    pub pair_se: Vec<Vec<f64>>,
    /// `E[(1/n)⟨L_a(Z), v*⟩]`.
    pub vec_stats: Vec<f64>,
    pub vec_sd: Vec<f64>,
    pub vec_se: Vec<f64>,
    /// Moments of `(1/n)‖v*‖²` after normalisation.
    pub norm_mean: f64,
    pub norm_sd: f64,
    pub norm_se: f64,
    /// `((1/n)E‖x^t‖²)^{1/2}`, estimated on an independent batch.
    pub normalization: f64,
    pub c_slack: f64,
    pub s_n: f64,
    pub c_k: f64,
    /// Trees of degree ≤ d and their caps on `‖T(X)‖∞⁴`.
    pub cap_trees: Vec<Lumber>,
    pub infinity_caps: Vec<f64>,
    pub policy: SlackPolicy,
    pub mc_samples: usize,
    pub skipped: usize,
    pub seed: u64,
}

impl StatisticsTable {
    pub fn pair_window(&self, a: usize, b: usize) -> f64 {
        match self.policy {
            SlackPolicy::Formula => self.c_slack,
            SlackPolicy::VarianceWindow { c } => self.c_slack.max(c * self.pair_sd[a][b]),
        }
    }

    pub fn vec_window(&self, a: usize) -> f64 {
        match self.policy {
            SlackPolicy::Formula => self.c_slack,
            SlackPolicy::VarianceWindow { c } => self.c_slack.max(c * self.vec_sd[a]),
        }
    }

    pub fn norm_window(&self) -> f64 {
        let base = self.eta / 48.0;
        match self.policy {
            SlackPolicy::Formula => base,
            SlackPolicy::VarianceWindow { c } => base.max(c * self.norm_sd),
        }
    }

    pub fn cap_for_degree(&self, degree: usize) -> f64 {
        infinity_cap(self.c_k, degree, self.n)
    }
}

/// `(5·C_K·deg·ln n)^{2·deg}`.
pub fn infinity_cap(c_k: f64, degree: usize, n: usize) -> f64 {
    if degree == 0 {
        return 1.0;
    }
    (5.0 * c_k * degree as f64 * (n as f64).ln()).powi(2 * degree as i32)
}

/// `η/(s(n)·N_L²)`.
pub fn c_slack(eta: f64, s_n: f64, n_lumber: usize) -> f64 {
    eta / (s_n * (n_lumber * n_lumber) as f64)
}

/// Values `L(X)` of every lumber in `list`.
pub fn lumber_vectors(x: &SymmetricMatrix, list: &[Lumber]) -> Vec<Vec<f64>> {
    let mut ev = TreeEvaluator::new(x);
    list.iter().map(|l| l.evaluate(&mut ev)).collect()
}

#[derive(Default, Clone)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    fn sd(&self) -> f64 {
        let m = self.mean();
        let var = (self.sum_sq - self.count as f64 * m * m) / (self.count as f64 - 1.0);
        var.max(0.0).sqrt()
    }

    fn se(&self) -> f64 {
        self.sd() / (self.count as f64).sqrt()
    }
}

/// Estimate lumber statistics of `(Z, v*)` with `Z` clean and `v*` the
/// normalised AMP output on `Z`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_statistics(
    fam: &DenoiserFamily,
    t: usize,
    d: usize,
    _prob: &ProblemSpec,
    ensemble: &EnsembleSpec,
    mc_samples: usize,
    seed: u64,
    eta: f64,
    opts: &CalibrationOptions,
) -> Result<StatisticsTable> {
    ensemble.validate()?;
    if mc_samples < 2 {
        return Err(Error::Config("calibration needs mc_samples ≥ 2".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Config("eta ∈ (0, 1)".into()));
    }
    let n = ensemble.n;
    let lumber = enumerate_lumber(d)?;
    let nl = lumber.len();
    let max_skip = mc_samples / 10;

    let run = |purpose: Purpose, k: usize| -> Result<Option<(SymmetricMatrix, Vec<f64>)>> {
        let z = sample_symmetric(ensemble, derive_seed(seed, purpose, k as u64))?;
        match amp_run(&z, fam, t, None) {
            Ok(tr) => Ok(Some((z, tr.last().to_vec()))),
            Err(Error::Divergence { step, reason }) => {
                warn!("calibration sample {k} skipped: divergence at step {step} ({reason})");
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };

    // normalisation from an independent batch
    let mut norm_raw = Moments::default();
    let mut skipped = 0;
    for k in 0..mc_samples {
        match run(Purpose::Normalization, k)? {
            Some((_, x)) => norm_raw.push(mean_dot(&x, &x)),
            None => skipped += 1,
        }
    }
    if skipped > max_skip {
        return Err(Error::Calibration(format!("{skipped} of {mc_samples} normalisation samples diverged")));
    }
    let normalization = norm_raw.mean().sqrt();
    if !(normalization > 0.0) {
        return Err(Error::Calibration("AMP output is identically zero".into()));
    }

    let mut pair = vec![vec![Moments::default(); nl]; nl];
    let mut vecs = vec![Moments::default(); nl];
    let mut norm = Moments::default();
    skipped = 0;
    for k in 0..mc_samples {
        let Some((z, x)) = run(Purpose::Calibration, k)? else {
            skipped += 1;
            continue;
        };
        let v: Vec<f64> = x.iter().map(|a| a / normalization).collect();
        let vals = lumber_vectors(&z, &lumber);
        for a in 0..nl {
            for b in a..nl {
                pair[a][b].push(mean_dot(&vals[a], &vals[b]));
            }
            vecs[a].push(mean_dot(&vals[a], &v));
        }
        norm.push(mean_dot(&v, &v));
    }
    if skipped > max_skip {
        return Err(Error::Calibration(format!("{skipped} of {mc_samples} calibration samples diverged")));
    }

    let full = |f: &dyn Fn(&Moments) -> f64| -> Vec<Vec<f64>> {
        (0..nl).map(|a| (0..nl).map(|b| f(&pair[a.min(b)][a.max(b)])).collect()).collect()
    };
    let s_n = opts.s_n.unwrap_or_else(|| (n as f64).ln());
    if !(s_n > 0.0) {
        return Err(Error::Config("s(n) must be positive; set s_n explicitly for n ≤ 1".into()));
    }
    let c_k = opts.c_k.unwrap_or(4.0 * ensemble.subgaussian_k * ensemble.subgaussian_k);
    let trees = trees_by_degree(d);
    let cap_trees: Vec<Lumber> = trees.iter().skip(1).flatten().map(|t: &RootedTree| Lumber::tree(t.clone())).collect();
    let infinity_caps = cap_trees.iter().map(|l| infinity_cap(c_k, l.degree(), n)).collect();

    let table = StatisticsTable {
        degree: d,
        n,
        t,
        eta,
        pair_stats: full(&Moments::mean),
        pair_sd: full(&Moments::sd),
        pair_se: full(&Moments::se),
        vec_stats: vecs.iter().map(Moments::mean).collect(),
        vec_sd: vecs.iter().map(Moments::sd).collect(),
        vec_se: vecs.iter().map(Moments::se).collect(),
        norm_mean: norm.mean(),
        norm_sd: norm.sd(),
        norm_se: norm.se(),
        normalization,
        c_slack: c_slack(eta, s_n, nl),
        s_n,
        c_k,
        cap_trees,
        infinity_caps,
        policy: opts.policy,
        mc_samples,
        skipped,
        seed,
        lumber,
    };
    if opts.enforce_standard_error {
        check_standard_errors(&table)?;
    }
    Ok(table)
}

/// Every standard error must be at most a quarter of its window.
pub fn check_standard_errors(table: &StatisticsTable) -> Result<()> {
    let nl = table.lumber.len();
    for a in 0..nl {
        for b in a..nl {
            if table.pair_se[a][b] > table.pair_window(a, b) / 4.0 {
                return Err(Error::Calibration(format!(
                    "pair ({}, {}) standard error {:.3e} exceeds window/4 = {:.3e}",
                    table.lumber[a].encoding(),
                    table.lumber[b].encoding(),
                    table.pair_se[a][b],
                    table.pair_window(a, b) / 4.0
                )));
            }
        }
        if table.vec_se[a] > table.vec_window(a) / 4.0 {
            return Err(Error::Calibration(format!(
                "vector statistic {} standard error {:.3e} exceeds window/4 = {:.3e}",
                table.lumber[a].encoding(),
                table.vec_se[a],
                table.vec_window(a) / 4.0
            )));
        }
    }
    Ok(())
}
