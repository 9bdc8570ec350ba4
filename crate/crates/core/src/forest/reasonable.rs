//! Empirical check that an instance is reasonable for the LStH program.

use serde::{Deserialize, Serialize};

use super::calibrate::{lumber_vectors, StatisticsTable};
use crate::error::{Error, Result};
use crate::matrix::{inf_norm, mean_dot, SymmetricMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReasonablenessReport {
    /// (1) every statistic inside its window.
    pub concentration: bool,
    /// Largest `|stat − table| / window`; at most 1 when (1) holds.
    pub worst_concentration_ratio: f64,
    pub worst_statistic: String,
    /// (2) `(1/n)‖v_AMP‖² ∈ 1 ± η/48`.
    pub norm: bool,
    pub norm_value: f64,
    pub norm_tolerance: f64,
    /// (3) `‖T(X)‖∞⁴` below its cap for every tree.
    pub infinity: bool,
    pub worst_infinity_ratio: f64,
    /// (4) `‖X‖²_op ≤ 5`.
    pub operator_norm: bool,
    pub op_norm_sq: f64,
    pub pass: bool,
}

/// Run the four checks on `(X, v_AMP)` against a calibrated table.
pub fn reasonableness_report(x: &SymmetricMatrix, v_amp: &[f64], stats: &StatisticsTable) -> Result<ReasonablenessReport> {
    let n = x.n();
    if v_amp.len() != n {
        return Err(Error::Dimension { expected: n, got: v_amp.len() });
    }
    let vals = lumber_vectors(x, &stats.lumber);
    let nl = stats.lumber.len();
    let mut worst = 0.0f64;
    let mut worst_label = String::new();
    let mut note = |ratio: f64, label: &dyn Fn() -> String| {
        if ratio > worst {
            worst = ratio;
            worst_label = label();
        }
    };
    for a in 0..nl {
        for b in a..nl {
            let dev = (mean_dot(&vals[a], &vals[b]) - stats.pair_stats[a][b]).abs();
            let ratio = dev / stats.pair_window(a, b);
            note(ratio, &|| format!("pair {} {}", stats.lumber[a].encoding(), stats.lumber[b].encoding()));
        }
        let dev = (mean_dot(&vals[a], v_amp) - stats.vec_stats[a]).abs();
        note(dev / stats.vec_window(a), &|| format!("vec {}", stats.lumber[a].encoding()));
    }
    let norm_value = mean_dot(v_amp, v_amp);
    let norm_tolerance = stats.eta / 48.0;
    let norm = (norm_value - 1.0).abs() <= norm_tolerance;

    let cap_vals = lumber_vectors(x, &stats.cap_trees);
    let worst_infinity_ratio = cap_vals
        .iter()
        .zip(&stats.infinity_caps)
        .map(|(v, cap)| inf_norm(v).powi(4) / cap)
        .fold(0.0f64, f64::max);
    let op_norm_sq = x.op_norm().powi(2);
    let concentration = worst <= 1.0;
    let infinity = worst_infinity_ratio <= 1.0;
    let operator_norm = op_norm_sq <= 5.0;
    Ok(ReasonablenessReport {
        concentration,
        worst_concentration_ratio: worst,
        worst_statistic: worst_label,
        norm,
        norm_value,
        norm_tolerance,
        infinity,
        worst_infinity_ratio,
        operator_norm,
        op_norm_sq,
        pass: concentration && norm && infinity && operator_norm,
    })
}
