use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rankone::sarnak::{
    decompose_observable, mobius_weighted_sum, partition_with_order, prime_extension_report,
    telescope_chain, Observable,
};
use rankone::{build_labels, sieve_mobius, ConstructionParams, Preset};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weighted_sum_is_linear(
        a in prop::collection::vec(-5i64..=5, 13),
        b in prop::collection::vec(-5i64..=5, 13),
        k in -4i64..=4,
        n in 1u64..3000,
        start in 0usize..100,
    ) {
        let model = build_labels(&Preset::Chacon.params(), 3, 9).unwrap();
        let table = sieve_mobius(3000).unwrap();
        let fa = Observable::new(3, a).unwrap();
        let fb = Observable::new(3, b).unwrap();
        let combo = fa.scaled(&k).add(&fb).unwrap();
        let sa = mobius_weighted_sum(&model, &fa, start, n, &table).unwrap().total;
        let sb = mobius_weighted_sum(&model, &fb, start, n, &table).unwrap().total;
        let sc = mobius_weighted_sum(&model, &combo, start, n, &table).unwrap().total;
        prop_assert_eq!(sc, k * sa + sb);
    }

    #[test]
    fn rational_weights_match_integer_weights(coeffs in prop::collection::vec(-6i64..=6, 6), den in 1i64..7) {
        let model = build_labels(&Preset::Class4.params(), 2, 10).unwrap();
        let table = sieve_mobius(1500).unwrap();
        let fi = Observable::new(2, coeffs.clone()).unwrap();
        let fr = Observable::new(
            2,
            coeffs.iter().map(|&c| BigRational::new(BigInt::from(c), BigInt::from(den))).collect(),
        )
        .unwrap();
        let si = mobius_weighted_sum(&model, &fi, 0, 1500, &table).unwrap().total;
        let sr = mobius_weighted_sum(&model, &fr, 0, 1500, &table).unwrap().total;
        prop_assert_eq!(sr, BigRational::new(BigInt::from(si), BigInt::from(den)));
    }

    #[test]
    fn decomposition_is_complete(d in 1u32..7, coeffs in prop::collection::vec(-9i64..=9, 1..40)) {
        let params = ConstructionParams::cyclic_factor(d).unwrap();
        let part = partition_with_order(&params, d as u64, 6).unwrap();
        let stage = part.consistent_from().max(1);
        let levels = rankone::construction::heights(&params, stage).unwrap().level_count_u64(stage).unwrap() as usize;
        let mut c = coeffs;
        c.resize(levels, 0);
        let f = Observable::new(stage, c.clone()).unwrap();
        let parts = decompose_observable(&f, &part).unwrap();
        prop_assert_eq!(parts.len(), d as usize);
        for (a, &ca) in c.iter().enumerate() {
            let sum: i64 = parts.iter().map(|p| p.coeffs()[a]).sum();
            prop_assert_eq!(sum, ca);
            for (i, p) in parts.iter().enumerate() {
                prop_assert!(p.coeffs()[a] == 0 || a % d as usize == i);
            }
        }
    }

    #[test]
    fn extension_bound_is_exact(m in 1u32..6, n in 1u64..5000, seed_levels in prop::collection::vec(0usize..40, 1..8)) {
        let params = Preset::Class4.params();
        let part = partition_with_order(&params, 2, 13).unwrap();
        let model = build_labels(&params, 6, 13).unwrap();
        let table = sieve_mobius(5000).unwrap();
        let levels: Vec<usize> = seed_levels.iter().map(|l| 2 * l).collect();
        let f = Observable::<i64>::indicator(6, model.ref_levels(), &levels).unwrap();
        let rep = prime_extension_report(&model, &part, &f, 2, 0, n, m, &table).unwrap();
        prop_assert!(rep.exact && rep.bound_holds);
        for w in rep.levels.windows(2) {
            // R_u = term_{u+1} + R_{u+1}
            prop_assert_eq!(w[0].remainder, w[1].term + w[1].remainder);
        }
    }
}

#[test]
fn composite_orders_chain_over_prime_factors() {
    let table = sieve_mobius(5000).unwrap();
    for d in [4u32, 6, 9, 10] {
        let params = ConstructionParams::cyclic_factor(d).unwrap();
        let part = partition_with_order(&params, d as u64, 9).unwrap();
        let model = build_labels(&params, 9, 9).unwrap();
        let base: Vec<usize> = (0..model.ref_levels()).step_by(d as usize).collect();
        let f = Observable::<i64>::indicator(9, model.ref_levels(), &base).unwrap();
        let n = 5000.min(model.len() as u64 - 2);
        let chain = telescope_chain(&model, &part, &f, 0, n, &table).unwrap();
        let primes: Vec<u64> = chain.iter().map(|c| c.d).collect();
        assert_eq!(primes.iter().product::<u64>(), d as u64);
        assert!(primes.windows(2).all(|w| w[0] <= w[1]));
        assert!(chain.iter().all(|c| c.equal), "d = {d}");
    }
}

#[test]
fn cyclic_factor_partitions_are_cyclic() {
    for d in 1..8u32 {
        let params = ConstructionParams::cyclic_factor(d).unwrap();
        let part = partition_with_order(&params, d as u64, 8).unwrap();
        assert_eq!(part.consistent_from(), 1);
        assert!(part.cyclicity_violation().is_none());
        assert_eq!(part.classes().len(), build_labels(&params, 1, 8).unwrap().len());
    }
}
