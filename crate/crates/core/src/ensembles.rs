//! Random symmetric instances and adversarial corruptions.

use log::warn;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Rademacher,
}

impl Family {
    /// `E[Z^m]` for the unit-variance variable `Z = √n · X_ij`.
    pub fn unit_moment(self, m: u32) -> f64 {
        if m % 2 == 1 {
            return 0.0;
        }
        match self {
            Family::Rademacher => 1.0,
            // (m − 1)!!
            Family::Gaussian => (1..m).step_by(2).map(f64::from).product(),
        }
    }

    fn draw(self, rng: &mut impl Rng) -> f64 {
        match self {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub family: Family,
    #[serde(default = "default_k")]
    pub subgaussian_k: f64,
}

fn default_k() -> f64 {
    1.0
}

impl EnsembleSpec {
    pub fn new(n: usize, family: Family) -> Self {
        Self { n, family, subgaussian_k: 1.0 }
    }

    pub fn gaussian(n: usize) -> Self {
        Self::new(n, Family::Gaussian)
    }

    pub fn rademacher(n: usize) -> Self {
        Self::new(n, Family::Rademacher)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("ensemble.n ≥ 1".into()));
        }
        if !(self.subgaussian_k > 0.0) || !self.subgaussian_k.is_finite() {
            return Err(Error::Config("ensemble.subgaussian_k > 0".into()));
        }
        Ok(())
    }

    /// Exact `E[X_ij^m]` (entries have variance `1/n`).
    pub fn entry_moment(&self, m: u32) -> f64 {
        self.family.unit_moment(m) * (self.n as f64).powf(-(m as f64) / 2.0)
    }
}

/// Sample `X` with i.i.d. entries on and above the diagonal, variance `1/n`.
/// Row `i` is drawn from its own stream, so the result is independent of
/// fill order.
pub fn sample_symmetric(spec: &EnsembleSpec, seed: u64) -> Result<SymmetricMatrix> {
    spec.validate()?;
    let n = spec.n;
    let scale = 1.0 / (n as f64).sqrt();
    let mut upper = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let mut rng = stream(seed, Purpose::MatrixRow, i as u64);
        for _ in i..n {
            upper.push(spec.family.draw(&mut rng) * scale);
        }
    }
    SymmetricMatrix::from_upper(n, upper)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Adversary {
    None,
    RankOneSpike,
    /// Resample the minor from the given family.
    RandomReplace { family: Family },
    ZeroRowsum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub epsilon: f64,
    pub adversary: Adversary,
    #[serde(default)]
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn none() -> Self {
        Self { epsilon: 0.0, adversary: Adversary::None, seed: 0 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config("corruption.epsilon ∈ [0, 1]".into()));
        }
        if support_size(self.epsilon, n) > n {
            return Err(Error::Config("⌈ε·n⌉ ≤ n".into()));
        }
        Ok(())
    }
}

/// `⌈ε·n⌉`, tolerant of representation error in `ε·n`.
pub fn support_size(epsilon: f64, n: usize) -> usize {
    let en = epsilon * n as f64;
    (en - 1e-9).ceil().max(0.0) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub support: Vec<usize>,
    pub corrupted: SymmetricMatrix,
    pub entries_changed: usize,
    /// Set by adversaries that are not confined to a principal minor.
    pub strong_contamination: bool,
    pub warning: Option<String>,
}

fn count_changed(x: &SymmetricMatrix, y: &SymmetricMatrix) -> usize {
    let n = x.n();
    let mut count = 0;
    for i in 0..n {
        for j in i..n {
            if x.get(i, j).to_bits() != y.get(i, j).to_bits() {
                count += if i == j { 1 } else { 2 };
            }
        }
    }
    count
}

/// Corrupt a random `⌈εn⌉ × ⌈εn⌉` principal minor.
pub fn corrupt_minor(x: &SymmetricMatrix, spec: &CorruptionSpec) -> Result<CorruptionRecord> {
    let n = x.n();
    spec.validate(n)?;
    if spec.adversary == Adversary::ZeroRowsum {
        return Err(Error::Unsupported(
            "zero_rowsum is a strong contamination; use zero_rowsum_contamination".into(),
        ));
    }
    let unchanged = |warning: Option<String>| CorruptionRecord {
        support: Vec::new(),
        corrupted: x.clone(),
        entries_changed: 0,
        strong_contamination: false,
        warning,
    };
    if spec.adversary == Adversary::None || spec.epsilon == 0.0 {
        return Ok(unchanged(None));
    }
    if spec.epsilon * (n as f64) < 1.0 {
        let msg = format!(
            "degenerate corruption: ε·n = {:.3} < 1, no entries corrupted",
            spec.epsilon * n as f64
        );
        warn!("{msg}");
        return Ok(unchanged(Some(msg)));
    }
    let k = support_size(spec.epsilon, n);
    let mut rng = stream(spec.seed, Purpose::Support, 0);
    let mut support = sample_indices(&mut rng, n, k).into_vec();
    support.sort_unstable();

    let mut y = x.clone();
    let scale = 1.0 / (n as f64).sqrt();
    match &spec.adversary {
        Adversary::RankOneSpike => {
            for (a, &i) in support.iter().enumerate() {
                for &j in &support[a..] {
                    y.set(i, j, x.get(i, j) + scale);
                }
            }
        }
        Adversary::RandomReplace { family } => {
            for (a, &i) in support.iter().enumerate() {
                let mut r = stream(spec.seed, Purpose::Replace, i as u64);
                for &j in &support[a..] {
                    y.set(i, j, family.draw(&mut r) * scale);
                }
            }
        }
        Adversary::None | Adversary::ZeroRowsum => unreachable!(),
    }
    let entries_changed = count_changed(x, &y);
    Ok(CorruptionRecord { support, corrupted: y, entries_changed, strong_contamination: false, warning: None })
}

/// Row sum in units of `1/√n` for a matrix with entries in `{0, ±1/√n}`:
/// the count of positive minus negative entries.
fn signed_count(y: &SymmetricMatrix, i: usize) -> i64 {
    (0..y.n())
        .map(|j| {
            let v = y.get(i, j);
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            }
        })
        .sum()
}

/// Row sum computed so that balanced rows give exactly zero: positive and
/// negative entries are accumulated separately in index order.
pub fn split_row_sum(y: &SymmetricMatrix, i: usize) -> f64 {
    let (mut pos, mut neg) = (0.0, 0.0);
    for j in 0..y.n() {
        let v = y.get(i, j);
        if v > 0.0 {
            pos += v;
        } else if v < 0.0 {
            neg -= v;
        }
    }
    pos - neg
}

/// Zero entries until every row sum vanishes.
///
/// Row `i` has `|b_i|` randomly chosen entries of the majority sign set to
/// zero (mirrored into column `i`). Zeroing `(i, j)` also shifts row `j`, so
/// sweeps repeat until no row is unbalanced; each fix strictly reduces the
/// number of nonzeros, which bounds the loop.
pub fn zero_rowsum_contamination(x: &SymmetricMatrix, seed: u64) -> Result<CorruptionRecord> {
    let n = x.n();
    let unit = 1.0 / (n as f64).sqrt();
    if x.upper().iter().any(|&v| v.abs() != unit) {
        return Err(Error::Unsupported("zero_rowsum requires a rademacher instance with entries ±1/√n".into()));
    }
    let mut y = x.clone();
    let mut sweep = 0u64;
    loop {
        let mut changed = false;
        for i in 0..n {
            let b = signed_count(&y, i);
            if b == 0 {
                continue;
            }
            changed = true;
            let candidates: Vec<usize> =
                (0..n).filter(|&j| y.get(i, j).signum() == b.signum() as f64 && y.get(i, j) != 0.0).collect();
            let mut rng = stream(seed, Purpose::RowZeroing, (sweep << 32) | i as u64);
            let mut need = b.unsigned_abs() as usize;
            // The diagonal counts once; everything else counts once in this row too.
            for idx in sample_indices(&mut rng, candidates.len(), candidates.len()).into_iter() {
                if need == 0 {
                    break;
                }
                y.set(i, candidates[idx], 0.0);
                need -= 1;
            }
        }
        if !changed {
            break;
        }
        sweep += 1;
    }
    let entries_changed = count_changed(x, &y);
    Ok(CorruptionRecord {
        support: Vec::new(),
        corrupted: y,
        entries_changed,
        strong_contamination: true,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_zero_is_a_configuration_error() {
        assert!(matches!(sample_symmetric(&EnsembleSpec::gaussian(0), 1), Err(Error::Config(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = EnsembleSpec::gaussian(17);
        assert_eq!(sample_symmetric(&spec, 9).unwrap(), sample_symmetric(&spec, 9).unwrap());
        assert_ne!(sample_symmetric(&spec, 9).unwrap(), sample_symmetric(&spec, 10).unwrap());
    }

    #[test]
    fn n_one_entry_has_unit_variance() {
        let spec = EnsembleSpec::gaussian(1);
        let m = 20_000;
        let s: f64 = (0..m).map(|s| sample_symmetric(&spec, s).unwrap().get(0, 0).powi(2)).sum::<f64>() / m as f64;
        // sd of the estimator is √(2/m) ≈ 0.01
        assert!((s - 1.0).abs() < 0.04, "{s}");
    }

    #[test]
    fn rademacher_entries_are_exact() {
        let x = sample_symmetric(&EnsembleSpec::rademacher(16), 3).unwrap();
        assert!(x.upper().iter().all(|&v| v.abs() == 0.25));
    }

    #[test]
    fn gaussian_moments() {
        assert_eq!(Family::Gaussian.unit_moment(2), 1.0);
        assert_eq!(Family::Gaussian.unit_moment(4), 3.0);
        assert_eq!(Family::Gaussian.unit_moment(6), 15.0);
        assert_eq!(Family::Gaussian.unit_moment(3), 0.0);
        assert_eq!(Family::Rademacher.unit_moment(8), 1.0);
    }

    #[test]
    fn epsilon_zero_is_identity() {
        let x = sample_symmetric(&EnsembleSpec::gaussian(12), 1).unwrap();
        let spec = CorruptionSpec { epsilon: 0.0, adversary: Adversary::RankOneSpike, seed: 4 };
        let rec = corrupt_minor(&x, &spec).unwrap();
        assert_eq!(rec.corrupted, x);
        assert!(rec.support.is_empty());
    }

    #[test]
    fn tiny_epsilon_warns_and_leaves_matrix() {
        let x = sample_symmetric(&EnsembleSpec::gaussian(10), 1).unwrap();
        let spec = CorruptionSpec { epsilon: 0.05, adversary: Adversary::RankOneSpike, seed: 4 };
        let rec = corrupt_minor(&x, &spec).unwrap();
        assert!(rec.warning.is_some());
        assert_eq!(rec.corrupted, x);
    }

    #[test]
    fn spike_eigenvalue_is_eps_sqrt_n() {
        let n = 40;
        let x = SymmetricMatrix::zeros(n);
        let spec = CorruptionSpec { epsilon: 0.25, adversary: Adversary::RankOneSpike, seed: 2 };
        let rec = corrupt_minor(&x, &spec).unwrap();
        assert_eq!(rec.support.len(), 10);
        let top = *rec.corrupted.eigenvalues().last().unwrap();
        assert!((top - 0.25 * (n as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_rowsum_rejects_gaussian() {
        let x = sample_symmetric(&EnsembleSpec::gaussian(10), 1).unwrap();
        assert!(matches!(zero_rowsum_contamination(&x, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn zero_rowsum_balanced_input_is_fixed_point() {
        // ±1/2 checkerboard on n=4: every row has two of each sign.
        let x = SymmetricMatrix::from_fn(4, |i, j| if (i + j) % 2 == 0 { 0.5 } else { -0.5 });
        let rec = zero_rowsum_contamination(&x, 1).unwrap();
        assert_eq!(rec.corrupted, x);
        assert_eq!(rec.entries_changed, 0);
    }
}
