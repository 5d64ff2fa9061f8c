mod support;

use mtranse_core::alignment::{score_vectors, AlignedVectors};
use mtranse_core::eval::{pr_points, rank_target};
use mtranse_core::knowledge::transe_score;
use mtranse_core::linalg;
use mtranse_core::ndarray::Array2;
use mtranse_core::twa::{fit_threshold, threshold_accuracy};
use mtranse_core::{project_to_sphere, LanguageId, LanguagePair, NormOrder, TransitionParams, Variant};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::oracles::{brute_force_rank, exhaustive_threshold};

fn pair() -> LanguagePair {
    LanguagePair::canonical(LanguageId::new("a").unwrap(), LanguageId::new("b").unwrap())
        .unwrap()
        .0
}

fn norm_order() -> impl Strategy<Value = NormOrder> {
    prop_oneof![Just(NormOrder::L1), Just(NormOrder::L2)]
}

fn vector(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Candidates come from a coarse grid so exact distance ties occur.
    #[test]
    fn rank_matches_brute_force(
        k in 1usize..6,
        n in 1usize..=1000,
        seed in any::<u64>(),
        norm in norm_order(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..k).map(|_| rng.random_range(-2i32..=2) as f64).collect() };
        let rows: Vec<Vec<f64>> = (0..n).map(|_| grid(&mut rng)).collect();
        let query = grid(&mut rng);
        let flat: Vec<f64> = rows.concat();
        let m = Array2::from_shape_vec((n, k), flat).unwrap();
        for target in [0, n / 2, n - 1, rng.random_range(0..n)] {
            prop_assert_eq!(
                rank_target(&query, m.view(), target, norm),
                brute_force_rank(&query, &rows, target, norm)
            );
        }
    }

    #[test]
    fn threshold_matches_exhaustive_sweep(
        cases in prop::collection::vec((0u8..20, any::<bool>()), 2..200),
    ) {
        let scores: Vec<f64> = cases.iter().map(|c| c.0 as f64 * 0.25).collect();
        let labels: Vec<bool> = cases.iter().map(|c| c.1).collect();
        prop_assume!(labels.contains(&true) && labels.contains(&false));
        let (sigma, acc) = fit_threshold(&scores, &labels).unwrap();
        prop_assert_eq!((sigma, acc), exhaustive_threshold(&scores, &labels));
        prop_assert_eq!(threshold_accuracy(&scores, &labels, sigma), acc);
    }

    #[test]
    fn pr_recall_and_predictions_grow_with_threshold(
        top1 in prop::collection::vec((0.0f64..3.0, any::<bool>()), 1..100),
        mut thresholds in prop::collection::vec(0.0f64..3.5, 1..30),
    ) {
        thresholds.sort_by(f64::total_cmp);
        let points = pr_points(&top1, &thresholds);
        for w in points.windows(2) {
            prop_assert!(w[0].recall <= w[1].recall);
            prop_assert!(w[0].predicted <= w[1].predicted);
        }
        for p in &points {
            prop_assert!((0.0..=1.0).contains(&p.precision));
            prop_assert!((0.0..=1.0).contains(&p.recall));
        }
    }

    #[test]
    fn projection_lands_on_the_sphere(v in vector(16)) {
        prop_assume!(linalg::l2_norm(&v) > 1e-9);
        let p = project_to_sphere(&v).unwrap();
        prop_assert!((linalg::l2_norm(&p) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn var2_adds_the_relation_term_to_var1(
        v in prop::collection::vec(vector(6), 6),
        norm in norm_order(),
    ) {
        let a = AlignedVectors {
            source: [&v[0], &v[1], &v[2]],
            target: [&v[3], &v[4], &v[5]],
        };
        let s1 = score_vectors(Variant::Var1, None, &a, norm);
        let s2 = score_vectors(Variant::Var2, None, &a, norm);
        let d: Vec<f64> = v[1].iter().zip(&v[4]).map(|(x, y)| x - y).collect();
        prop_assert!((s2 - s1 - norm.norm(&d)).abs() <= 1e-12 * s2.max(1.0));
    }

    #[test]
    fn var5_with_shared_matrix_extends_var4(
        v in prop::collection::vec(vector(4), 6),
        m in vector(16),
    ) {
        let k = 4;
        let m = Array2::from_shape_vec((k, k), m).unwrap();
        let p4 = TransitionParams::new(pair(), Variant::Var4, k, None, None, Some(m.clone()), None).unwrap();
        let p5 = TransitionParams::new(pair(), Variant::Var5, k, None, None, Some(m.clone()), Some(m.clone())).unwrap();
        let a = AlignedVectors {
            source: [&v[0], &v[1], &v[2]],
            target: [&v[3], &v[4], &v[5]],
        };
        let s4 = score_vectors(Variant::Var4, Some(&p4), &a, NormOrder::L2);
        let s5 = score_vectors(Variant::Var5, Some(&p5), &a, NormOrder::L2);
        let mr = linalg::mat_vec(m.view(), &v[1]);
        let d: Vec<f64> = mr.iter().zip(&v[4]).map(|(x, y)| x - y).collect();
        prop_assert!((s5 - s4 - linalg::l2_norm(&d)).abs() <= 1e-12 * s5.max(1.0));
    }

    #[test]
    fn l2_transe_score_is_rotation_invariant(
        h in vector(8), r in vector(8), t in vector(8), seed in any::<u64>(),
    ) {
        let q = linalg::random_orthogonal(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let rot = |x: &[f64]| linalg::mat_vec(q.view(), x);
        let before = transe_score(&h, &r, &t, NormOrder::L2);
        let after = transe_score(&rot(&h), &rot(&r), &rot(&t), NormOrder::L2);
        prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
    }
}
