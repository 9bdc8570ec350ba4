//! Feasibility solve with an audited verdict.

use serde::{Deserialize, Serialize};

use super::admm::{solve_admm, RawOutcome};
use super::lowrank::{default_rank, solve_lowrank};
use super::ops::Certificate;
use super::pe::{audit, PseudoExpectation};
use super::system::ConstraintSystem;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Splitting for `dim ≤ admm_max_dim`, low rank above.
    Auto,
    Admm,
    LowRank,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub max_iters: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Factor width for the low-rank method; `None` picks `⌈√(2m)⌉ ≤ 16`.
    pub rank: Option<usize>,
    /// Largest moment dimension accepted at all.
    pub max_dim: usize,
    pub admm_max_dim: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Auto,
            max_iters: 20_000,
            tolerance: 1e-6,
            seed: 0,
            rank: None,
            max_dim: 4000,
            admm_max_dim: 400,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    /// Backed by a verified Farkas certificate.
    Infeasible,
    /// Out of iterations without either a feasible point or a certificate.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub verdict: Verdict,
    pub method: SolverKind,
    /// The audited feasible point, or the best iterate when indeterminate.
    pub pe: Option<PseudoExpectation>,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
    pub best_violation: f64,
    pub residual_trace: Vec<f64>,
}

/// Search for a PSD moment matrix satisfying `sys`. `warm` is an optional
/// starting point in the monomial basis, typically `X̂ = Y, W = 1`.
pub fn solve_feasibility(sys: &ConstraintSystem, cfg: &SolverConfig, warm: Option<&[f64]>) -> Result<SolveReport> {
    let dim = sys.dim();
    if dim > cfg.max_dim {
        return Err(Error::Resource(format!("moment dimension {dim} exceeds the cap {}", cfg.max_dim)));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(Error::Config("solver tolerance must be positive".into()));
    }
    if let Some(z) = warm {
        if z.len() != dim {
            return Err(Error::Dimension { expected: dim, got: z.len() });
        }
    }
    let method = match cfg.kind {
        SolverKind::Auto if dim <= cfg.admm_max_dim => SolverKind::Admm,
        SolverKind::Auto => SolverKind::LowRank,
        k => k,
    };
    let raw: RawOutcome = match method {
        SolverKind::Admm => solve_admm(sys, cfg.max_iters, cfg.tolerance)?,
        _ => {
            let rank = cfg.rank.unwrap_or_else(|| default_rank(sys.constraints.len()));
            solve_lowrank(sys, warm, rank, cfg.max_iters, cfg.tolerance, cfg.seed)?
        }
    };
    if let Some(cert) = raw.certificate {
        return Ok(SolveReport {
            verdict: Verdict::Infeasible,
            method,
            pe: None,
            certificate: Some(cert),
            iterations: raw.iterations,
            best_violation: raw.best_violation,
            residual_trace: raw.trace,
        });
    }
    let pe = match raw.moment {
        Some(moment) => {
            let residuals = audit(sys, &moment, cfg.tolerance)?;
            Some(PseudoExpectation { basis: sys.basis, moment, residuals })
        }
        None => None,
    };
    let verdict = match &pe {
        Some(p) if p.residuals.pass => Verdict::Feasible,
        _ => Verdict::Indeterminate,
    };
    Ok(SolveReport {
        verdict,
        method,
        pe,
        certificate: None,
        iterations: raw.iterations,
        best_violation: raw.best_violation,
        residual_trace: raw.trace,
    })
}
