//! Worked examples checked against independent oracles.

mod common;

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robust_amp::amp::{amp_run, objective, round_to_feasible, Denoiser, DenoiserFamily, ProblemSpec};
use robust_amp::ensembles::{
    corrupt_minor, sample_symmetric, zero_rowsum_contamination, Adversary, CorruptionSpec, EnsembleSpec, Family,
};
use robust_amp::forest::{
    calibrate_statistics, compile_amp_forest, enumerate_lumber, evaluate_forest, evaluate_tree, lumber_bound,
    rooted_expectation, trunk_value, CalibrationOptions, Forest, Lumber, RootedTree, Tree,
};
use robust_amp::matrix::SymmetricMatrix;

use common::*;

fn t1() -> Tree {
    Tree::reroot(Tree::Empty)
}

#[test]
fn lumber_counts_match_brute_force() {
    for d in 0..=3 {
        let lib = enumerate_lumber(d).unwrap().len();
        assert_eq!(lib, brute_force_lumber_count(d), "degree {d}");
    }
    // frozen from the brute-force oracle
    assert_eq!(enumerate_lumber(2).unwrap().len(), 9);
    assert_eq!(enumerate_lumber(3).unwrap().len(), 25);
    for d in 0..=4 {
        assert!(enumerate_lumber(d).unwrap().len() as f64 <= lumber_bound(d));
    }
}

#[test]
fn encodings_agree_with_bijection_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut same, mut differ) = (0, 0);
    for _ in 0..400 {
        let a = random_tree(&mut rng, 4);
        let b = random_tree(&mut rng, 4);
        let iso = isomorphic_brute_force(&parent_array(&a), &parent_array(&b));
        assert_eq!(a.canonical().encoding() == b.canonical().encoding(), iso, "{a:?} vs {b:?}");
        if iso {
            same += 1;
        } else {
            differ += 1;
        }
    }
    assert!(same > 10 && differ > 10, "{same} isomorphic, {differ} not");
}

#[test]
fn graft_order_and_empty_encoding() {
    let a = Tree::reroot(t1());
    let b = Tree::graft(t1(), t1());
    assert_eq!(Tree::graft(a.clone(), b.clone()).canonical(), Tree::graft(b, a).canonical());
    assert_eq!(Tree::Empty.canonical().encoding(), "()");
}

#[test]
fn entry_second_moment_is_one_over_n() {
    let n = 100;
    let mut squares = Vec::new();
    for seed in 0..20 {
        let x = sample_symmetric(&EnsembleSpec::gaussian(n), seed).unwrap();
        squares.extend(x.upper().iter().map(|v| v * v * n as f64));
    }
    assert!(squares.len() >= 100_000);
    let (m, se) = mean_se(&squares);
    assert!((m - 1.0).abs() <= 3.0 * se, "n·E[X²] = {m} ± {se}");
}

#[test]
fn operator_norm_near_two() {
    let inside = (0..20)
        .filter(|&seed| {
            let x = sample_symmetric(&EnsembleSpec::gaussian(500), seed).unwrap();
            let eig = SymmetricEigen::new(x.to_dense()).eigenvalues;
            let op = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!((op - x.op_norm()).abs() < 1e-8);
            (1.8..=2.1).contains(&op)
        })
        .count();
    assert!(inside >= 18, "{inside} of 20");
}

#[test]
fn corruption_stays_inside_the_minor() {
    for seed in 0..5 {
        let x = sample_symmetric(&EnsembleSpec::gaussian(50), seed).unwrap();
        for adversary in [Adversary::RankOneSpike, Adversary::RandomReplace { family: Family::Gaussian }] {
            let rec = corrupt_minor(&x, &CorruptionSpec { epsilon: 0.2, adversary, seed }).unwrap();
            assert_eq!(rec.support.len(), 10);
            let (xd, yd) = (x.to_dense(), rec.corrupted.to_dense());
            for i in 0..50 {
                for j in 0..50 {
                    if xd[(i, j)] != yd[(i, j)] {
                        assert!(rec.support.contains(&i) && rec.support.contains(&j), "({i}, {j})");
                    }
                }
            }
        }
    }
}

#[test]
fn spike_has_eigenvalue_eps_sqrt_n() {
    let n = 64;
    let x = sample_symmetric(&EnsembleSpec::gaussian(n), 3).unwrap();
    let rec = corrupt_minor(&x, &CorruptionSpec { epsilon: 0.25, adversary: Adversary::RankOneSpike, seed: 3 }).unwrap();
    let diff = rec.corrupted.sub(&x).unwrap();
    let top = diff.eigenvalues().into_iter().fold(f64::MIN, f64::max);
    assert!((top - 0.25 * (n as f64).sqrt()).abs() < 1e-10, "{top}");
}

#[test]
fn zero_rowsum_rows_vanish_exactly() {
    let n = 100;
    for seed in 0..5 {
        let x = sample_symmetric(&EnsembleSpec::rademacher(n), seed).unwrap();
        let rec = zero_rowsum_contamination(&x, seed).unwrap();
        for i in 0..n {
            // exact: entries are ±1/√n or zero with equal counts of each sign
            let pos = rec.corrupted.row(i).iter().filter(|v| **v > 0.0).count();
            let neg = rec.corrupted.row(i).iter().filter(|v| **v < 0.0).count();
            assert_eq!(pos, neg, "row {i}");
        }
        assert!(rec.strong_contamination);
    }
}

#[test]
fn nnpca_recursion_by_hand() {
    let n = 30;
    let x = sample_symmetric(&EnsembleSpec::gaussian(n), 11).unwrap();
    let fam = DenoiserFamily::uniform(Denoiser::relu(), 4);
    let trace = amp_run(&x, &fam, 4, None).unwrap();
    let relu = |v: &[f64]| v.iter().map(|a| a.max(0.0)).collect::<Vec<f64>>();
    let mut prev = vec![0.0; n];
    let mut cur = vec![1.0; n];
    for s in 0..4 {
        let plus = relu(&cur);
        let b = if s == 0 { 0.0 } else { cur.iter().filter(|a| **a > 0.0).count() as f64 / n as f64 };
        let prev_plus = relu(&prev);
        let next: Vec<f64> = x.matvec(&plus).iter().zip(&prev_plus).map(|(a, p)| a - b * p).collect();
        for i in 0..n {
            assert!((next[i] - trace.x(s + 1)[i]).abs() < 1e-12, "step {} coord {i}", s + 1);
        }
        prev = cur;
        cur = next;
    }
}

#[test]
fn square_denoiser_forest_terms() {
    let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 0.0, 1.0]), 2);
    let forest = compile_amp_forest(&fam, 2).unwrap();
    let t2 = Tree::reroot(Tree::graft(t1(), t1())).canonical();
    let trunk = Lumber::new(RootedTree::leaf(), vec![t1().canonical()]).unwrap();
    let mut expected = Forest::single(Lumber::tree(t2), 1.0);
    expected.add_term(trunk, -2.0);
    assert_eq!(forest, expected);
}

#[test]
fn forest_is_linear() {
    let x = sample_symmetric(&EnsembleSpec::gaussian(40), 2).unwrap();
    let a = compile_amp_forest(&DenoiserFamily::uniform(Denoiser::polynomial(&[0.3, 1.0, -0.5]), 2), 2).unwrap();
    let b = compile_amp_forest(&DenoiserFamily::uniform(Denoiser::polynomial(&[1.0, 0.0, 2.0]), 2), 2).unwrap();
    let sum = evaluate_forest(&a.add(&b), &x);
    let parts: Vec<f64> = evaluate_forest(&a, &x).iter().zip(evaluate_forest(&b, &x)).map(|(p, q)| p + q).collect();
    for (s, p) in sum.iter().zip(&parts) {
        assert!((s - p).abs() <= 1e-12 * (1.0 + p.abs()));
    }
    assert!(evaluate_forest(&Forest::zero(), &x).iter().all(|v| *v == 0.0));
    assert_eq!(evaluate_forest(&Forest::single(Lumber::empty(), 1.0), &x), vec![1.0; 40]);
}

#[test]
fn constant_matrix_trunk_is_sqrt_n() {
    let n = 25;
    let x = SymmetricMatrix::from_fn(n, |_, _| 1.0 / (n as f64).sqrt());
    assert!((trunk_value(&t1(), &x).unwrap() - 5.0).abs() < 1e-12);
    assert!(evaluate_tree(&Tree::graft(t1(), t1()), &x).iter().all(|v| (v - 25.0).abs() < 1e-12));
}

fn trunk_variances(n: usize, trees: &[Tree], samples: u64) -> Vec<f64> {
    let xs: Vec<SymmetricMatrix> = (0..samples).map(|s| sample_symmetric(&EnsembleSpec::gaussian(n), 1000 + s).unwrap()).collect();
    trees
        .iter()
        .map(|t| {
            let vals: Vec<f64> = xs.iter().map(|x| trunk_value(t, x).unwrap()).collect();
            let (m, _) = mean_se(&vals);
            vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1) as f64
        })
        .collect()
}

/// `Var(𝗄_T) ≤ (K²d)^{d/2}/n` with `K` the smallest constant satisfying
/// `E|Z|^k ≤ K^k k^{k/2}` for a standard gaussian, which is `√(2/π)` (k = 1).
/// The bound leaves out the labeling count: already `Var(𝗄_{T₁}) = (2n−1)/n²`,
/// which needs `K ≥ 2`. Kept literal; expected to fail at degree 1.
#[test]
fn trunk_variance_within_bound() {
    let n = 500;
    let k = (2.0 / std::f64::consts::PI).sqrt();
    let trees = [t1(), Tree::reroot(t1()), Tree::graft(t1(), t1()), Tree::reroot(Tree::reroot(t1())), Tree::reroot(Tree::graft(t1(), t1()))];
    let vars = trunk_variances(n, &trees, 200);
    let mut over = Vec::new();
    for (t, var) in trees.iter().zip(vars) {
        let d = t.degree() as f64;
        let bound = (k * k * d).powf(d / 2.0) / n as f64;
        if var > bound {
            over.push(format!("{}: {var:.3e} > {bound:.3e}", t.canonical().encoding()));
        }
    }
    assert!(over.is_empty(), "{over:?}");
}

#[test]
fn trunk_variance_is_order_one_over_n() {
    let trees = [t1(), Tree::reroot(t1()), Tree::graft(t1(), t1())];
    let small = trunk_variances(250, &trees, 300);
    let large = trunk_variances(1000, &trees, 300);
    // exact at degree 1
    let exact = (2.0 * 1000.0 - 1.0) / 1e6;
    assert!((large[0] - exact).abs() < 0.25 * exact, "{} vs {exact}", large[0]);
    for (s, l) in small.iter().zip(&large) {
        let ratio = s / l;
        assert!((2.5..=6.0).contains(&ratio), "variance ratio {ratio} for a 4× larger n");
    }
}

#[test]
fn doubled_edge_expectation_is_one() {
    let path2 = Tree::reroot(t1()).canonical();
    for n in [5, 30, 200] {
        let e = rooted_expectation(&path2, &EnsembleSpec::gaussian(n)).unwrap();
        assert!((e - 1.0).abs() < 1e-12, "n = {n}: {e}");
    }
    let samples: Vec<f64> = (0..4000)
        .map(|s| {
            let x = sample_symmetric(&EnsembleSpec::gaussian(30), s).unwrap();
            evaluate_tree(&Tree::reroot(t1()), &x)[0]
        })
        .collect();
    let (m, se) = mean_se(&samples);
    assert!((m - 1.0).abs() <= 3.0 * se, "{m} ± {se}");
}

#[test]
fn row_sum_pair_statistic() {
    // labeling sum for Graft(T₁, T₁): only the doubled edge survives, so
    // E[(1/n)‖X1⃗‖²] = 1 whether or not the second label equals the root.
    let n = 40;
    let cherry = Tree::graft(t1(), t1()).canonical();
    let exact = rooted_expectation(&cherry, &EnsembleSpec::gaussian(n)).unwrap();
    assert!((exact - 1.0).abs() < 1e-12);
    let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 1.0]), 1);
    let opts = CalibrationOptions { enforce_standard_error: false, ..Default::default() };
    let table =
        calibrate_statistics(&fam, 1, 1, &ProblemSpec::nnpca(), &EnsembleSpec::gaussian(n), 2000, 5, 0.5, &opts).unwrap();
    let a = table.lumber.iter().position(|l| l.trunks.is_empty() && l.base == t1().canonical()).unwrap();
    let (m, se) = (table.pair_stats[a][a], table.pair_se[a][a]);
    assert!((m - exact).abs() <= 3.0 * se, "{m} ± {se}");
    assert!((table.norm_mean - 1.0).abs() <= 2.0 * table.norm_se + 0.02, "{} ± {}", table.norm_mean, table.norm_se);
}

#[test]
fn nnpca_rounding_and_objective() {
    let n = 6;
    let unit = vec![1.0 / (n as f64).sqrt(); n];
    assert_eq!(round_to_feasible(&unit, &ProblemSpec::nnpca()).unwrap(), unit);
    let x = SymmetricMatrix::identity(n);
    assert!((objective(&x, &unit).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(objective(&x, &vec![0.0; n]).unwrap(), 0.0);
    let sk = round_to_feasible(&[0.3, -2.0, 0.0, 1.0, -0.1, 5.0], &ProblemSpec::sk()).unwrap();
    assert!(sk.iter().all(|v| (v.abs() - 1.0 / (n as f64).sqrt()).abs() < 1e-15));
}
