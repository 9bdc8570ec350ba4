//! Invariants checked over generated inputs.

use proptest::prelude::*;

use robust_amp::amp::{amp_run, onsager_coeff, round_to_feasible, Denoiser, DenoiserFamily, ProblemSpec};
use robust_amp::ensembles::{
    corrupt_minor, sample_symmetric, support_size, zero_rowsum_contamination, Adversary, CorruptionSpec,
    EnsembleSpec, Family,
};
use robust_amp::forest::{compile_amp_forest, evaluate_forest, Tree};
use robust_amp::lsth::correlation;
use robust_amp::matrix::SymmetricMatrix;

fn tree_strategy() -> impl Strategy<Value = Tree> {
    Just(Tree::Empty).prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Tree::reroot),
            (inner.clone(), inner).prop_map(|(a, b)| Tree::graft(a, b)),
        ]
    })
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Gaussian), Just(Family::Rademacher)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrices_are_symmetric_and_round_trip(n in 1usize..12, seed in any::<u64>(), fam in family()) {
        let x = sample_symmetric(&EnsembleSpec::new(n, fam), seed).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(x.get(i, j).to_bits(), x.get(j, i).to_bits());
            }
        }
        prop_assert_eq!(SymmetricMatrix::from_symmat(&x.to_symmat()).unwrap(), x.clone());
        prop_assert_eq!(sample_symmetric(&EnsembleSpec::new(n, fam), seed).unwrap(), x);
    }

    #[test]
    fn corruption_is_confined(n in 2usize..40, eps in 0.0f64..0.5, seed in any::<u64>(), spike in any::<bool>()) {
        let x = sample_symmetric(&EnsembleSpec::gaussian(n), seed).unwrap();
        let adversary = if spike { Adversary::RankOneSpike } else { Adversary::RandomReplace { family: Family::Rademacher } };
        let rec = corrupt_minor(&x, &CorruptionSpec { epsilon: eps, adversary, seed }).unwrap();
        if eps * (n as f64) < 1.0 {
            prop_assert!(rec.support.is_empty());
            prop_assert_eq!(rec.warning.is_some(), eps > 0.0);
        } else {
            prop_assert_eq!(rec.support.len(), support_size(eps, n));
            prop_assert!(rec.support.len() as f64 >= eps * n as f64 - 1e-9);
        }
        for i in 0..n {
            for j in 0..n {
                if x.get(i, j) != rec.corrupted.get(i, j) {
                    prop_assert!(rec.support.contains(&i) && rec.support.contains(&j));
                }
            }
        }
    }

    #[test]
    fn zero_rowsum_balances_every_row(n in 2usize..60, seed in any::<u64>()) {
        let x = sample_symmetric(&EnsembleSpec::rademacher(n), seed).unwrap();
        let rec = zero_rowsum_contamination(&x, seed).unwrap();
        for i in 0..n {
            let row = rec.corrupted.row(i);
            let pos = row.iter().filter(|v| **v > 0.0).count();
            let neg = row.iter().filter(|v| **v < 0.0).count();
            prop_assert_eq!(pos, neg);
        }
        prop_assert!(rec.entries_changed as f64 <= (n * n) as f64);
    }

    #[test]
    fn forest_matches_amp(
        c0 in -1.0f64..1.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0,
        t in 1usize..=3, big in any::<bool>(), seed in any::<u64>(),
    ) {
        let n = if big { 50 } else { 20 };
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[c0, c1, c2]), t);
        let x = sample_symmetric(&EnsembleSpec::gaussian(n), seed).unwrap();
        let direct = amp_run(&x, &fam, t, None).unwrap();
        let compiled = evaluate_forest(&compile_amp_forest(&fam, t).unwrap(), &x);
        let scale = direct.last().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in compiled.iter().zip(direct.last()) {
            prop_assert!((a - b).abs() <= 1e-8 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn last_iterate_onsager_vanishes_before_t(t in 2usize..5, seed in any::<u64>()) {
        let fam = DenoiserFamily::uniform(Denoiser::polynomial(&[0.0, 1.0, 0.5]), t);
        let x = sample_symmetric(&EnsembleSpec::gaussian(30), seed).unwrap();
        let trace = amp_run(&x, &fam, t - 1, None).unwrap();
        let iterates = trace.prefix(t - 1);
        for j in 0..t - 1 {
            prop_assert_eq!(onsager_coeff(&iterates, &fam, t - 1, j).unwrap(), 0.0);
        }
    }

    #[test]
    fn correlation_is_a_squared_cosine(u in prop::collection::vec(-5.0f64..5.0, 1..20), s in -3.0f64..3.0) {
        prop_assume!(u.iter().any(|v| v.abs() > 1e-3) && s.abs() > 1e-3);
        let w: Vec<f64> = u.iter().map(|v| v * s).collect();
        let c = correlation(&u, &w).unwrap();
        prop_assert!((c - 1.0).abs() < 1e-12);
        let other: Vec<f64> = u.iter().enumerate().map(|(i, v)| v + i as f64).collect();
        let c = correlation(&u, &other).unwrap_or(0.0);
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn canonical_form_ignores_graft_order(a in tree_strategy(), b in tree_strategy()) {
        let ab = Tree::graft(a.clone(), b.clone());
        let ba = Tree::graft(b, a);
        prop_assert_eq!(ab.canonical().encoding(), ba.canonical().encoding());
        prop_assert_eq!(ab.canonical().degree(), ab.degree());
    }

    #[test]
    fn rounding_lands_in_the_feasible_set(x in prop::collection::vec(-3.0f64..3.0, 2..30)) {
        let n = x.len();
        let sk = round_to_feasible(&x, &ProblemSpec::sk()).unwrap();
        prop_assert!(ProblemSpec::sk().contains(&sk, 1e-12));
        prop_assert!(sk.iter().all(|v| (v.abs() * (n as f64).sqrt() - 1.0).abs() < 1e-12));
        if x.iter().any(|v| *v > 0.0) {
            let nn = round_to_feasible(&x, &ProblemSpec::nnpca()).unwrap();
            prop_assert!(ProblemSpec::nnpca().contains(&nn, 1e-12));
        }
    }
}
