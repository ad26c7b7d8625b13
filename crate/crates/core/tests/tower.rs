use proptest::prelude::*;
use rankone::construction::heights;
use rankone::tower::correlation_matrix;
use rankone::{build_labels, ConstructionParams, LevelLabel, StageParams};

fn construction() -> impl Strategy<Value = ConstructionParams> {
    let stage = (2u32..4).prop_flat_map(|r| {
        prop::collection::vec(0u32..3, r as usize).prop_map(move |s| StageParams::new(r, s).unwrap())
    });
    (0u64..3, prop::collection::vec(stage, 1..3))
        .prop_map(|(h1, pattern)| ConstructionParams::periodic(h1, pattern).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prefix_embedding_and_counts(params in construction(), j in 1usize..4, extra in 0usize..4) {
        let k = j + extra;
        let small = build_labels(&params, j, k).unwrap();
        let big = build_labels(&params, j, k + 1).unwrap();
        let a: Vec<LevelLabel> = small.labels().collect();
        let b: Vec<LevelLabel> = big.labels().collect();
        prop_assert!(b.starts_with(&a));

        let t = heights(&params, k).unwrap();
        let copies: u64 = (j..k).map(|m| params.stage(m).unwrap().r() as u64).product();
        let lj = t.level_count_u64(j).unwrap();
        prop_assert_eq!(small.copies(), copies);
        prop_assert_eq!(small.spacer_count(), t.level_count_u64(k).unwrap() - lj * copies);
        let mut seen = vec![0u64; lj as usize];
        for l in &a {
            if let LevelLabel::Reference(x) = l {
                seen[*x as usize] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == copies));
    }

    #[test]
    fn orbit_steps_compose(params in construction(), start in 0usize..40, n in 0usize..30, m in 0usize..30) {
        let model = build_labels(&params, 1, 8).unwrap();
        prop_assume!(start + n + m < model.len());
        let whole = model.orbit(start, n + m).unwrap();
        let first = model.orbit(start, n).unwrap();
        let second = model.orbit(start + n, m).unwrap();
        prop_assert_eq!(&whole[..n], &first[..]);
        prop_assert_eq!(&whole[n..], &second[..]);
    }

    #[test]
    fn approximate_measure_preservation(params in construction(), n in -20i64..=20) {
        let model = build_labels(&params, 2, 9).unwrap();
        let c = model.correlation::<f64>(n).unwrap();
        let len = model.len() as f64;
        for a in 0..model.ref_levels() {
            let nu = model.copies() as f64 / len;
            prop_assert!((c.row_sum(a) - nu).abs() <= n.unsigned_abs() as f64 / len + 1e-12);
        }
    }

    #[test]
    fn single_and_double_precision_agree(params in construction(), n in -10i64..=10) {
        let lo = correlation_matrix::<f32>(&params, 2, 8, n).unwrap();
        let hi = correlation_matrix::<f64>(&params, 2, 8, n).unwrap();
        for a in 0..lo.size() {
            for b in 0..lo.size() {
                prop_assert_eq!(lo.count(a, b), hi.count(a, b));
                prop_assert!((lo.get(a, b) as f64 - hi.get(a, b)).abs() < 1e-6);
            }
        }
    }
}
