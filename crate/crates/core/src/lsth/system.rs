//! Compilation of the robust local-statistics constraints.

use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::basis::MonomialBasis;
use super::poly::{FormPool, Poly};
use crate::ensembles::support_size;
use crate::error::{Error, Result};
use crate::forest::{Lumber, RootedTree, StatisticsTable};
use crate::matrix::{inf_norm, SymmetricMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Robust,
    Lsh,
    Norm,
    Plumbing,
}

/// `lower ≤ Σ c·ℓ^⊤ M m ≤ upper` over the moment matrix `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub tag: Tag,
    pub label: String,
    /// `(coef, left form, right form)`.
    pub terms: Vec<(f64, usize, usize)>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Constraint {
    pub fn violation(&self, value: f64) -> f64 {
        let lo = self.lower.map_or(0.0, |l| l - value);
        let hi = self.upper.map_or(0.0, |u| value - u);
        lo.max(hi).max(0.0)
    }

    pub fn is_equality(&self) -> bool {
        self.lower.is_some() && self.lower == self.upper
    }

    /// Midpoint and half-width of the window, when both sides are bounded.
    pub fn target_and_slack(&self) -> Option<(f64, f64)> {
        Some(((self.lower? + self.upper?) / 2.0, (self.upper? - self.lower?) / 2.0))
    }

    /// `Σ c·pz[ℓ]·pz[m]` at an integral point.
    pub fn eval_point(&self, pz: &[f64]) -> f64 {
        self.terms.iter().map(|&(c, l, m)| c * pz[l] * pz[m]).sum()
    }

    /// `Σ c·ℓ^⊤ M m`.
    pub fn eval_moment(&self, pool: &FormPool, m: &SymmetricMatrix) -> f64 {
        self.terms
            .iter()
            .map(|&(c, l, r)| {
                let mut s = 0.0;
                for &(a, ca) in &pool.forms[l] {
                    for &(b, cb) in &pool.forms[r] {
                        s += ca * cb * m.get(a, b);
                    }
                }
                c * s
            })
            .sum()
    }
}

/// `bound·I − E[X̂²] ⪰ 0`, where `E[X̂²]_ab = Σ_k pE[X̂_ak X̂_kb]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpNormLmi {
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroppedConstraint {
    pub label: String,
    pub reason: String,
}

/// Which constraint families to emit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LshConfig {
    /// Robust mode adds `W` and `X̂` to the basis.
    pub robust: bool,
    /// Largest lumber degree used.
    pub degree: usize,
    pub pairs: bool,
    pub vectors: bool,
    pub caps: bool,
    pub norm: bool,
    pub op_norm: bool,
    pub op_norm_bound: f64,
    /// Largest `n` accepted in robust mode.
    pub robust_n_cap: usize,
}

impl Default for LshConfig {
    fn default() -> Self {
        Self {
            robust: false,
            degree: 2,
            pairs: true,
            vectors: true,
            caps: true,
            norm: true,
            op_norm: true,
            op_norm_bound: 5.0,
            robust_n_cap: 60,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub basis: MonomialBasis,
    pub pool: FormPool,
    pub constraints: Vec<Constraint>,
    pub lmi: Option<OpNormLmi>,
    pub dropped: Vec<DroppedConstraint>,
    /// Right-hand side of the corruption budget.
    pub budget: f64,
}

impl ConstraintSystem {
    /// An empty system over `basis` with only `pE[1] = 1`.
    pub fn new(basis: MonomialBasis) -> Self {
        let mut sys = Self { basis, pool: FormPool::default(), constraints: Vec::new(), lmi: None, dropped: Vec::new(), budget: 0.0 };
        let one = sys.pool.unit(0);
        sys.push(Tag::Plumbing, "pE[1] = 1".into(), vec![(1.0, one, one)], Some(1.0), Some(1.0));
        sys
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn push(&mut self, tag: Tag, label: String, terms: Vec<(f64, usize, usize)>, lower: Option<f64>, upper: Option<f64>) {
        self.constraints.push(Constraint { tag, label, terms, lower, upper });
    }

    /// Push `lower ≤ poly ≤ upper`.
    pub fn push_poly(&mut self, tag: Tag, label: String, poly: Poly, lower: Option<f64>, upper: Option<f64>) {
        let terms = poly.into_terms(&mut self.pool);
        self.push(tag, label, terms, lower, upper);
    }

    /// `[(1/n)Σ_i M[v_i, v_i]]`-style helper: entry `M[a, b]` as a term.
    pub fn entry(&mut self, coef: f64, a: usize, b: usize) -> (f64, usize, usize) {
        (coef, self.pool.unit(a), self.pool.unit(b))
    }

    /// JSON export with factored functionals.
    pub fn to_json(&self) -> Value {
        let constraints: Vec<Value> = self
            .constraints
            .iter()
            .map(|c| {
                let (target, slack) = c.target_and_slack().map_or((Value::Null, Value::Null), |(t, s)| (t.into(), s.into()));
                json!({
                    "tag": c.tag,
                    "label": c.label,
                    "functional": c.terms,
                    "lower": c.lower,
                    "upper": c.upper,
                    "target": target,
                    "slack": slack,
                })
            })
            .collect();
        json!({
            "dim": self.dim(),
            "n": self.basis.n,
            "robust": self.basis.robust,
            "budget": self.budget,
            "forms": self.pool.forms,
            "constraints": constraints,
            "lmi": self.lmi,
            "dropped": self.dropped,
        })
    }

    /// Evaluate every constraint and the LMI at an integral point `z`.
    pub fn check_point(&self, z: &[f64]) -> PointReport {
        let pz = self.pool.project(z);
        let mut worst = 0.0f64;
        let mut worst_label = String::new();
        for c in &self.constraints {
            let v = c.violation(c.eval_point(&pz));
            if v > worst {
                worst = v;
                worst_label = c.label.clone();
            }
        }
        let lmi_violation = self.lmi.map_or(0.0, |lmi| {
            let xh = xhat_from_point(&self.basis, z);
            (xh.op_norm().powi(2) - lmi.bound).max(0.0)
        });
        PointReport { max_violation: worst, worst_label, lmi_violation }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub max_violation: f64,
    pub worst_label: String,
    pub lmi_violation: f64,
}

impl PointReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol && self.lmi_violation <= tol
    }
}

fn xhat_from_point(basis: &MonomialBasis, z: &[f64]) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(basis.n, |i, j| z[basis.xhat(i, j)])
}

/// The integral point `z = (1, v, W, X̂)`.
pub fn integral_point(basis: &MonomialBasis, v: &[f64], w: Option<&[f64]>, xhat: Option<&SymmetricMatrix>) -> Result<Vec<f64>> {
    let n = basis.n;
    if v.len() != n {
        return Err(Error::Dimension { expected: n, got: v.len() });
    }
    let mut z = vec![0.0; basis.dim()];
    z[0] = 1.0;
    for i in 0..n {
        z[basis.v(i)] = v[i];
    }
    if basis.robust {
        let (w, xhat) = match (w, xhat) {
            (Some(w), Some(x)) => (w, x),
            _ => return Err(Error::Config("robust witness needs W and X̂".into())),
        };
        for j in 0..n {
            z[basis.w(j)] = w[j];
            for i in j..n {
                z[basis.xhat(j, i)] = xhat.get(j, i);
            }
        }
    }
    Ok(z)
}

/// Tree values with `X̂` either free (robust) or fixed to data.
struct SymbolicTrees<'a> {
    basis: MonomialBasis,
    data: Option<&'a SymmetricMatrix>,
    values: HashMap<RootedTree, Rc<Vec<Poly>>>,
}

impl<'a> SymbolicTrees<'a> {
    fn edge(&mut self, pool: &mut FormPool, child: &RootedTree) -> Result<Vec<Poly>> {
        let c = self.value(pool, child)?;
        let n = self.basis.n;
        if let Some(y) = self.data {
            if c.iter().all(Poly::is_constant) {
                let cv: Vec<f64> = c.iter().map(|p| p.constant).collect();
                return Ok(y.matvec(&cv).into_iter().map(Poly::constant).collect());
            }
            return (0..n)
                .map(|i| {
                    let mut acc = Poly::default();
                    for (j, cj) in c.iter().enumerate() {
                        acc.add_assign(&cj.scale(y.get(i, j)));
                    }
                    Ok(acc)
                })
                .collect();
        }
        if c.iter().all(Poly::is_constant) {
            return Ok((0..n)
                .map(|i| {
                    let f: Vec<(usize, f64)> = (0..n)
                        .filter(|&j| c[j].constant != 0.0)
                        .map(|j| (self.basis.xhat(i, j), c[j].constant))
                        .collect();
                    Poly::form(pool.add(f))
                })
                .collect());
        }
        (0..n)
            .map(|i| {
                let mut acc = Poly::default();
                for (j, cj) in c.iter().enumerate() {
                    acc.add_assign(&Poly::form(pool.unit(self.basis.xhat(i, j))).mul(cj)?);
                }
                Ok(acc)
            })
            .collect()
    }

    fn value(&mut self, pool: &mut FormPool, t: &RootedTree) -> Result<Rc<Vec<Poly>>> {
        if let Some(v) = self.values.get(t) {
            return Ok(v.clone());
        }
        let mut out = vec![Poly::constant(1.0); self.basis.n];
        for c in &t.children {
            let e = self.edge(pool, c)?;
            for (o, p) in out.iter_mut().zip(&e) {
                *o = o.mul(p)?;
            }
        }
        let rc = Rc::new(out);
        self.values.insert(t.clone(), rc.clone());
        Ok(rc)
    }

    fn lumber(&mut self, pool: &mut FormPool, l: &Lumber) -> Result<Vec<Poly>> {
        let n = self.basis.n as f64;
        let mut scale = Poly::constant(1.0);
        for t in &l.trunks {
            let mut k = Poly::default();
            for p in self.value(pool, t)?.iter() {
                k.add_assign(p);
            }
            scale = scale.mul(&k.scale(1.0 / n))?;
        }
        self.value(pool, &l.base)?.iter().map(|p| scale.mul(p)).collect()
    }
}

/// `(1/n)Σ_i a_i b_i`.
fn mean_product(a: &[Poly], b: &[Poly]) -> Result<Poly> {
    let mut acc = Poly::default();
    for (x, y) in a.iter().zip(b) {
        acc.add_assign(&x.mul(y)?);
    }
    Ok(acc.scale(1.0 / a.len() as f64))
}

/// Emit the constraint system for the observation `Y`.
pub fn build_constraint_system(y: &SymmetricMatrix, eps: f64, stats: &StatisticsTable, cfg: &LshConfig) -> Result<ConstraintSystem> {
    let n = y.n();
    if stats.n != n {
        return Err(Error::Dimension { expected: stats.n, got: n });
    }
    if cfg.degree > stats.degree {
        return Err(Error::Config(format!("lumber degree {} exceeds calibrated degree {}", cfg.degree, stats.degree)));
    }
    if cfg.robust && n > cfg.robust_n_cap {
        return Err(Error::Resource(format!("robust mode with n = {n} exceeds the cap {}", cfg.robust_n_cap)));
    }
    let basis = MonomialBasis::new(n, cfg.robust);
    let mut sys = ConstraintSystem::new(basis);
    let one = sys.pool.unit(0);

    if cfg.robust {
        let budget = support_size(eps, n) as f64;
        sys.budget = budget;
        for j in 0..n {
            let wj = sys.pool.unit(basis.w(j));
            sys.push(Tag::Robust, format!("W_{j}² = W_{j}"), vec![(1.0, wj, wj), (-1.0, one, wj)], Some(0.0), Some(0.0));
        }
        for j in 0..n {
            let wj = sys.pool.unit(basis.w(j));
            for i in 0..n {
                let xij = sys.pool.unit(basis.xhat(i, j));
                sys.push(
                    Tag::Robust,
                    format!("W_{j} X̂_{i},{j} = W_{j} Y_{i},{j}"),
                    vec![(1.0, wj, xij), (-y.get(i, j), one, wj)],
                    Some(0.0),
                    Some(0.0),
                );
            }
        }
        let mut terms = vec![(n as f64, one, one)];
        for i in 0..n {
            terms.push((-1.0, one, sys.pool.unit(basis.w(i))));
        }
        sys.push(Tag::Robust, "Σ(1 − W_i) ≤ budget".into(), terms, None, Some(budget));
        for j in 0..n {
            let wj = sys.pool.unit(basis.w(j));
            let mut terms = vec![(n as f64 - budget, one, wj)];
            for i in 0..n {
                terms.push((-1.0, wj, sys.pool.unit(basis.w(i))));
            }
            sys.push(Tag::Robust, format!("W_{j}·Σ(1 − W_i) ≤ budget·W_{j}"), terms, None, Some(0.0));
        }
    }

    if cfg.norm {
        let w = stats.norm_window();
        let terms = (0..n).map(|i| sys.entry(1.0 / n as f64, basis.v(i), basis.v(i))).collect();
        sys.push(Tag::Lsh, "(1/n)‖v‖² = 1".into(), terms, Some(1.0 - w), Some(1.0 + w));
    }

    let mut trees = SymbolicTrees { basis, data: if cfg.robust { None } else { Some(y) }, values: HashMap::new() };
    let chosen: Vec<usize> = (0..stats.lumber.len()).filter(|&a| stats.lumber[a].degree() <= cfg.degree).collect();
    let representable = |deg: usize| !cfg.robust || deg <= 2;
    let mut lumber_polys: HashMap<usize, Vec<Poly>> = HashMap::new();
    for &a in &chosen {
        let l = &stats.lumber[a];
        if l.degree() <= 2 || !cfg.robust {
            lumber_polys.insert(a, trees.lumber(&mut sys.pool, l)?);
        }
    }

    if cfg.pairs {
        for (ia, &a) in chosen.iter().enumerate() {
            for &b in &chosen[ia..] {
                let (la, lb) = (&stats.lumber[a], &stats.lumber[b]);
                let label = format!("pair {} {}", la.encoding(), lb.encoding());
                if !representable(la.degree() + lb.degree()) {
                    sys.dropped.push(DroppedConstraint { label, reason: "degree above the moment basis".into() });
                    continue;
                }
                let p = mean_product(&lumber_polys[&a], &lumber_polys[&b])?;
                let (t, w) = (stats.pair_stats[a][b], stats.pair_window(a, b));
                sys.push_poly(Tag::Lsh, label, p, Some(t - w), Some(t + w));
            }
        }
    }

    if cfg.vectors {
        let v: Vec<Poly> = (0..n).map(|i| Poly::form(sys.pool.unit(basis.v(i)))).collect();
        for &a in &chosen {
            let la = &stats.lumber[a];
            let label = format!("vec {}", la.encoding());
            if !representable(la.degree() + 1) {
                sys.dropped.push(DroppedConstraint { label, reason: "degree above the moment basis".into() });
                continue;
            }
            let p = mean_product(&lumber_polys[&a], &v)?;
            let (t, w) = (stats.vec_stats[a], stats.vec_window(a));
            sys.push_poly(Tag::Lsh, label, p, Some(t - w), Some(t + w));
        }
    }

    if cfg.caps {
        for (l, cap) in stats.cap_trees.iter().zip(&stats.infinity_caps) {
            if l.degree() > cfg.degree {
                continue;
            }
            let label = format!("cap {}", l.encoding());
            if !representable(2 * l.degree()) {
                sys.dropped.push(DroppedConstraint { label, reason: "degree above the moment basis".into() });
                continue;
            }
            let vals = trees.lumber(&mut sys.pool, l)?;
            let bound = cap.sqrt();
            if vals.iter().all(Poly::is_constant) {
                let c: Vec<f64> = vals.iter().map(|p| p.constant).collect();
                let m = inf_norm(&c);
                sys.push_poly(Tag::Lsh, format!("{label} (max over i)"), Poly::constant(m * m), None, Some(bound));
            } else {
                for (i, p) in vals.iter().enumerate() {
                    sys.push_poly(Tag::Lsh, format!("{label} coordinate {i}"), p.mul(p)?, None, Some(bound));
                }
            }
        }
    }

    if cfg.op_norm {
        if cfg.robust {
            sys.lmi = Some(OpNormLmi { bound: cfg.op_norm_bound });
        } else {
            let s = y.op_norm().powi(2);
            sys.push_poly(Tag::Norm, "‖Y‖²_op ≤ bound".into(), Poly::constant(s), None, Some(cfg.op_norm_bound));
        }
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amp::{Denoiser, DenoiserFamily, ProblemSpec};
    use crate::ensembles::{sample_symmetric, EnsembleSpec};
    use crate::forest::{calibrate_statistics, lumber_vectors, CalibrationOptions};
    use crate::matrix::mean_dot;

    fn table(n: usize) -> StatisticsTable {
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 1.0]), 2);
        calibrate_statistics(&fam, 2, 2, &ProblemSpec::nnpca(), &EnsembleSpec::gaussian(n), 40, 5, 0.1, &CalibrationOptions { enforce_standard_error: false, ..Default::default() })
            .unwrap()
    }

    #[test]
    fn robust_symbolic_values_match_numeric() {
        let n = 8;
        let stats = table(n);
        let x = sample_symmetric(&EnsembleSpec::gaussian(n), 77).unwrap();
        let cfg = LshConfig { robust: true, ..Default::default() };
        let sys = build_constraint_system(&x, 0.25, &stats, &cfg).unwrap();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let z = integral_point(&sys.basis, &v, Some(&vec![1.0; n]), Some(&x)).unwrap();
        let pz = sys.pool.project(&z);
        let vals = lumber_vectors(&x, &stats.lumber);
        let mut checked = 0;
        for c in &sys.constraints {
            let Some(rest) = c.label.strip_prefix("vec ") else { continue };
            let a = stats.lumber.iter().position(|l| l.encoding() == rest).unwrap();
            assert!((c.eval_point(&pz) - mean_dot(&vals[a], &v)).abs() < 1e-12);
            checked += 1;
        }
        for c in &sys.constraints {
            let Some(rest) = c.label.strip_prefix("pair ") else { continue };
            let (ea, eb) = rest.split_once(' ').unwrap();
            let a = stats.lumber.iter().position(|l| l.encoding() == ea).unwrap();
            let b = stats.lumber.iter().position(|l| l.encoding() == eb).unwrap();
            assert!((c.eval_point(&pz) - mean_dot(&vals[a], &vals[b])).abs() < 1e-12, "{}", c.label);
            checked += 1;
        }
        assert!(checked > 5);
        assert!(!sys.dropped.is_empty());
    }

    #[test]
    fn budget_right_hand_side() {
        let n = 10;
        let stats = table(n);
        let x = sample_symmetric(&EnsembleSpec::gaussian(n), 1).unwrap();
        let cfg = LshConfig { robust: true, ..Default::default() };
        let sys = build_constraint_system(&x, 0.3, &stats, &cfg).unwrap();
        let budget = sys.constraints.iter().find(|c| c.label.starts_with("Σ(1 − W_i)")).unwrap();
        assert_eq!(budget.upper, Some(3.0));
        assert_eq!(sys.lmi.unwrap().bound, 5.0);
    }

    #[test]
    fn robust_cap_is_a_resource_error() {
        let stats = table(12);
        let x = sample_symmetric(&EnsembleSpec::gaussian(12), 1).unwrap();
        let cfg = LshConfig { robust: true, robust_n_cap: 10, ..Default::default() };
        assert!(matches!(build_constraint_system(&x, 0.1, &stats, &cfg), Err(Error::Resource(_))));
    }
}
